#include "eduvid/dataset.hpp"

#include <cmath>
#include <set>
#include <unordered_map>

#include "eduvid/csv.hpp"
#include "eduvid/error.hpp"

namespace eduvid::dataset {

FeatureVector feature_vector(const extract::VideoFeatures& f) {
    return {f.duration_min, static_cast<double>(f.word_count), f.speaking_speed_wpm,
            static_cast<double>(f.scene_count), f.scene_rate_spm};
}

bool is_complete(const DatasetRow& row) {
    if (!row.features || !row.average_percentage_viewed) return false;
    if (!std::isfinite(*row.average_percentage_viewed)) return false;
    for (double v : feature_vector(*row.features))
        if (!std::isfinite(v)) return false;
    return true;
}

std::size_t AnalysisDataset::complete_count() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.complete ? 1 : 0;
    return n;
}

namespace {

template <typename T, typename KeyFn>
std::unordered_map<std::string, const T*> index_unique(std::span<const T> items, KeyFn key,
                                                       std::string_view source) {
    std::unordered_map<std::string, const T*> index;
    for (const auto& item : items) {
        const std::string& k = key(item);
        if (!index.emplace(k, &item).second)
            throw Error(ErrorKind::DuplicateKey, "video id appears twice in " + std::string(source),
                        {.video_id = k});
    }
    return index;
}

}  // namespace

AnalysisDataset build_dataset(std::span<const ingest::VideoMetadata> metadata,
                              std::span<const extract::VideoFeatures> features,
                              std::span<const ingest::EngagementRecord> engagement) {
    index_unique(metadata, [](const auto& m) -> const std::string& { return m.remote.video_id; }, "metadata");
    auto by_features = index_unique(features, [](const auto& f) -> const std::string& { return f.video_id; }, "features");
    auto by_engagement =
        index_unique(engagement, [](const auto& e) -> const std::string& { return e.video_id; }, "engagement");

    AnalysisDataset ds;
    ds.rows.reserve(metadata.size());
    for (const auto& m : metadata) {
        DatasetRow row;
        row.video_id = m.remote.video_id;
        row.dataset_tag = ingest::make_dataset_tag(m.manual).value();
        row.manual = m.manual;
        row.video_url = m.remote.url;
        if (auto it = by_features.find(row.video_id); it != by_features.end()) row.features = *it->second;
        if (auto it = by_engagement.find(row.video_id); it != by_engagement.end())
            row.average_percentage_viewed = it->second->average_percentage_viewed;
        row.complete = is_complete(row);
        ds.rows.push_back(std::move(row));
    }
    return ds;
}

OrphanIds find_orphans(std::span<const ingest::VideoMetadata> metadata,
                       std::span<const extract::VideoFeatures> features,
                       std::span<const ingest::EngagementRecord> engagement) {
    std::set<std::string> known;
    for (const auto& m : metadata) known.insert(m.remote.video_id);
    OrphanIds out;
    for (const auto& f : features)
        if (!known.contains(f.video_id)) out.features.push_back(f.video_id);
    for (const auto& e : engagement)
        if (!known.contains(e.video_id)) out.engagement.push_back(e.video_id);
    return out;
}

std::string_view to_string(IssueKind kind) noexcept {
    switch (kind) {
        case IssueKind::Missing: return "missing";
        case IssueKind::OutOfRange: return "out_of_range";
        case IssueKind::NonFinite: return "non_finite";
        case IssueKind::TagPattern: return "tag_pattern";
        case IssueKind::TagMismatch: return "tag_mismatch";
        case IssueKind::InvalidMetadata: return "invalid_metadata";
        case IssueKind::Orphan: return "orphan";
    }
    return "unknown";
}

ValidationReport validate_dataset(const AnalysisDataset& ds) {
    ValidationReport report;
    report.total_rows = ds.rows.size();
    auto add = [&](const DatasetRow& row, std::string field, IssueKind kind, std::string message) {
        report.issues.push_back({row.video_id, std::move(field), kind, std::move(message)});
    };

    for (const auto& row : ds.rows) {
        if (is_complete(row)) ++report.complete_rows;

        bool manual_ok = true;
        try {
            row.manual.validate();
        } catch (const Error& e) {
            manual_ok = false;
            add(row, e.context().field, IssueKind::InvalidMetadata, e.message());
        }
        if (!ingest::DatasetTag::is_valid(row.dataset_tag)) {
            add(row, "dataset_tag", IssueKind::TagPattern, "'" + row.dataset_tag + "' is not a valid dataset tag");
        } else if (manual_ok) {
            try {
                auto expected = ingest::make_dataset_tag(row.manual);
                if (expected.value() != row.dataset_tag)
                    add(row, "dataset_tag", IssueKind::TagMismatch,
                        "tag '" + row.dataset_tag + "' should be '" + expected.value() + "'");
            } catch (const Error& e) {
                add(row, e.context().field, IssueKind::InvalidMetadata, e.message());
            }
        }

        if (!row.features) {
            add(row, "features", IssueKind::Missing, "no extracted features for this video");
        } else {
            const auto values = feature_vector(*row.features);
            for (std::size_t j = 0; j < kFeatureCount; ++j) {
                const std::string name(kFeatureNames[j]);
                if (!std::isfinite(values[j]))
                    add(row, name, IssueKind::NonFinite, "value is " + format_number(values[j]));
                else if (values[j] < 0.0 || (j == 0 && values[j] == 0.0))
                    add(row, name, IssueKind::OutOfRange, "value " + format_number(values[j]) + " is not allowed");
            }
        }

        const std::string target(kTargetName);
        if (!row.average_percentage_viewed) {
            add(row, target, IssueKind::Missing, "no engagement record for this video");
        } else if (!std::isfinite(*row.average_percentage_viewed)) {
            add(row, target, IssueKind::NonFinite, "value is " + format_number(*row.average_percentage_viewed));
        } else if (*row.average_percentage_viewed < 0.0 || *row.average_percentage_viewed > 100.0) {
            add(row, target, IssueKind::OutOfRange,
                format_number(*row.average_percentage_viewed) + " outside [0, 100]");
        }
    }
    return report;
}

namespace {

constexpr std::array<std::string_view, 17> kColumns{
    "dataset_tag",  "video_id",       "institution_name",  "speaker_name",       "course_code",
    "course_name",  "unit_level",     "year",              "video_type",         "subject_area",
    "video_url",    "duration_min",   "word_count",        "speaking_speed_wpm", "scene_count",
    "scene_rate_spm", "average_percentage_viewed",
};

}  // namespace

std::string write_dataset(const AnalysisDataset& ds) {
    std::string out;
    std::vector<std::string> row(kColumns.begin(), kColumns.end());
    csv::append_row(out, row);
    for (const auto& r : ds.rows) {
        row = {r.dataset_tag,
               r.video_id,
               r.manual.institution_name,
               r.manual.speaker_name,
               r.manual.course_code,
               r.manual.course_name,
               r.manual.unit_level,
               std::to_string(r.manual.year),
               std::string(ingest::to_string(r.manual.video_type)),
               r.manual.subject_area,
               r.video_url};
        if (r.features) {
            row.push_back(format_number(r.features->duration_min));
            row.push_back(std::to_string(r.features->word_count));
            row.push_back(format_number(r.features->speaking_speed_wpm));
            row.push_back(std::to_string(r.features->scene_count));
            row.push_back(format_number(r.features->scene_rate_spm));
        } else {
            row.insert(row.end(), 5, std::string());
        }
        row.push_back(r.average_percentage_viewed ? format_number(*r.average_percentage_viewed) : std::string());
        csv::append_row(out, row);
    }
    return out;
}

AnalysisDataset read_dataset(std::string_view text) {
    auto table = csv::Table::parse(text);
    std::array<std::size_t, kColumns.size()> idx{};
    for (std::size_t i = 0; i < kColumns.size(); ++i) idx[i] = table.require(kColumns[i]);

    AnalysisDataset ds;
    ds.rows.reserve(table.rows().size());
    for (std::size_t r = 0; r < table.rows().size(); ++r) {
        auto cell = [&](std::size_t col) { return table.cell(r, idx[col]); };
        DatasetRow row;
        row.video_id = std::string(cell(1));
        auto fail = [&](std::size_t col, std::string message) {
            return Error(ErrorKind::ValueError, std::move(message),
                         {.video_id = row.video_id, .field = std::string(kColumns[col]), .row = r + 1});
        };
        if (row.video_id.empty()) throw fail(1, "empty video_id");
        row.dataset_tag = std::string(cell(0));
        auto year = parse_number(cell(7));
        if (!year || *year != std::floor(*year)) throw fail(7, "'" + std::string(cell(7)) + "' is not a year");
        try {
            row.manual = ingest::ManualMetadata{std::string(cell(2)), std::string(cell(3)),
                                                std::string(cell(4)), std::string(cell(5)),
                                                std::string(cell(6)), static_cast<int>(*year),
                                                ingest::parse_video_type(cell(8)), std::string(cell(9))};
        } catch (const Error& e) {
            throw fail(8, e.message());
        }
        row.video_url = std::string(cell(10));

        std::size_t present = 0;
        for (std::size_t c = 11; c <= 15; ++c) present += trim(cell(c)).empty() ? 0 : 1;
        if (present == 5) {
            auto real = [&](std::size_t col) {
                auto v = parse_number(cell(col));
                if (!v) throw fail(col, "'" + std::string(cell(col)) + "' is not a number");
                return *v;
            };
            auto count = [&](std::size_t col) {
                auto v = parse_unsigned(cell(col));
                if (!v) throw fail(col, "'" + std::string(cell(col)) + "' is not a non-negative integer");
                return *v;
            };
            row.features = extract::VideoFeatures{row.video_id, real(11), count(12), real(13), count(14), real(15)};
        } else if (present != 0) {
            throw fail(11, "feature cells must be all present or all empty");
        }

        if (!trim(cell(16)).empty()) {
            auto v = parse_number(cell(16));
            if (!v) throw fail(16, "'" + std::string(cell(16)) + "' is not a number");
            row.average_percentage_viewed = *v;
        }
        row.complete = is_complete(row);
        ds.rows.push_back(std::move(row));
    }
    return ds;
}

ModelingView modeling_view(const AnalysisDataset& ds) {
    ModelingView view;
    for (const auto& row : ds.rows) {
        if (!is_complete(row)) continue;
        const double y = *row.average_percentage_viewed;
        if (y < 0.0 || y > 100.0)
            throw Error(ErrorKind::ValueError, format_number(y) + " outside [0, 100]",
                        {.video_id = row.video_id, .field = std::string(kTargetName)});
        view.video_ids.push_back(row.video_id);
        view.features.push_back(feature_vector(*row.features));
        view.target.push_back(y);
    }
    return view;
}

}  // namespace eduvid::dataset
