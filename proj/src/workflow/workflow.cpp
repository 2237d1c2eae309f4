#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include "eduvid/csv.hpp"
#include "eduvid/decoder.hpp"
#include "eduvid/workflow.hpp"

namespace eduvid::workflow {

using nlohmann::json;

namespace {

void require_stage(const fs::path& artifact, std::string_view stage, std::string_view prerequisite) {
    if (!fs::exists(artifact))
        throw Error(ErrorKind::StageOrderViolation,
                    std::string(stage) + " requires " + artifact.filename().string() + " (run " +
                        std::string(prerequisite) + " first)",
                    {.field = artifact.filename().string()});
}

Error at_path(const Error& e, const std::string& prefix) {
    auto ctx = e.context();
    ctx.field = ctx.field.empty() ? prefix : prefix + "." + ctx.field;
    return Error(e.kind(), e.message(), std::move(ctx));
}

std::string optional_string(const json& obj, const char* key, const std::string& path) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return {};
    if (!it->is_string()) throw Error(ErrorKind::SchemaError, "expected a string", {.field = path + "." + key});
    return it->get<std::string>();
}

}  // namespace

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

json read_json_file(const fs::path& path) {
    const auto text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::SchemaError, path.filename().string() + " is not valid JSON: " + e.what());
    }
}

json error_json(const Error& e) {
    json body{{"kind", to_string(e.kind())}, {"message", e.message()}};
    const auto& ctx = e.context();
    if (!ctx.field.empty()) body["field"] = ctx.field;
    if (!ctx.video_id.empty()) body["video_id"] = ctx.video_id;
    if (ctx.row) body["row"] = *ctx.row;
    return json{{"error", std::move(body)}};
}

json stage_status(const Layout& layout) {
    auto status = [](const fs::path& artifact, bool ready) {
        return fs::exists(artifact) ? "done" : ready ? "ready" : "locked";
    };
    const bool has_dataset = fs::exists(layout.dataset());
    return json{{"metadata", status(layout.metadata(), true)},
                {"engagement", status(layout.engagement(), true)},
                {"extract", status(layout.features(), true)},
                {"dataset", status(layout.dataset(), fs::exists(layout.metadata()))},
                {"eda", status(layout.eda(), has_dataset)},
                {"model", status(layout.model(), has_dataset)},
                {"report", status(layout.report_json(), fs::exists(layout.model()))}};
}

// ---------------------------------------------------------------------------
// Metadata

ingest::ManualMetadata manual_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw Error(ErrorKind::SchemaError, "expected an object", {.field = path});
    auto text = [&](const char* key) {
        const auto it = j.find(key);
        if (it == j.end()) throw Error(ErrorKind::SchemaError, "missing field", {.field = path + "." + key});
        if (!it->is_string()) throw Error(ErrorKind::SchemaError, "expected a string", {.field = path + "." + key});
        return it->get<std::string>();
    };
    ingest::ManualMetadata m;
    m.institution_name = text("institution_name");
    m.speaker_name = text("speaker_name");
    m.course_code = text("course_code");
    m.course_name = text("course_name");
    m.unit_level = text("unit_level");
    m.subject_area = text("subject_area");
    const auto year = j.find("year");
    if (year == j.end()) throw Error(ErrorKind::SchemaError, "missing field", {.field = path + ".year"});
    if (year->is_number_integer()) {
        m.year = year->get<int>();
    } else if (year->is_string()) {
        const auto v = parse_unsigned(year->get<std::string>());
        if (!v || *v > 9999) throw Error(ErrorKind::ValueError, "year must be an integer", {.field = path + ".year"});
        m.year = static_cast<int>(*v);
    } else {
        throw Error(ErrorKind::SchemaError, "year must be an integer", {.field = path + ".year"});
    }
    try {
        m.video_type = ingest::parse_video_type(text("video_type"));
    } catch (const Error& e) {
        throw Error(e.kind(), e.message(), {.field = path + ".video_type"});
    }
    return m;
}

json to_json(const ingest::ManualMetadata& m) {
    return {{"institution_name", m.institution_name}, {"speaker_name", m.speaker_name},
            {"course_code", m.course_code},           {"course_name", m.course_name},
            {"unit_level", m.unit_level},             {"year", m.year},
            {"video_type", ingest::to_string(m.video_type)}, {"subject_area", m.subject_area}};
}

MetadataRequest parse_metadata_request(const json& j) {
    if (!j.is_object()) throw Error(ErrorKind::SchemaError, "request body must be a JSON object");
    MetadataRequest req;
    if (const auto it = j.find("fetch_remote"); it != j.end()) {
        if (!it->is_boolean()) throw Error(ErrorKind::SchemaError, "expected a boolean", {.field = "fetch_remote"});
        req.fetch_remote = it->get<bool>();
    }
    const json defaults = j.value("manual", json::object());
    if (!defaults.is_object()) throw Error(ErrorKind::SchemaError, "expected an object", {.field = "manual"});
    const auto videos = j.find("videos");
    if (videos == j.end() || !videos->is_array() || videos->empty())
        throw Error(ErrorKind::SchemaError, "expected a non-empty array", {.field = "videos"});

    for (std::size_t i = 0; i < videos->size(); ++i) {
        const auto& v = (*videos)[i];
        const std::string path = "videos[" + std::to_string(i) + "]";
        if (!v.is_object()) throw Error(ErrorKind::SchemaError, "expected an object", {.field = path});
        ingest::RemoteMetadata r;
        r.video_id = optional_string(v, "video_id", path);
        if (trim(r.video_id).empty())
            throw Error(ErrorKind::SchemaError, "missing video_id", {.field = path + ".video_id"});
        r.url = optional_string(v, "url", path);
        if (r.url.empty()) r.url = ingest::watch_url(r.video_id);
        r.title = optional_string(v, "title", path);
        r.channel_name = optional_string(v, "channel_name", path);
        r.channel_id = optional_string(v, "channel_id", path);
        if (const auto published = optional_string(v, "published_at", path); !published.empty()) {
            try {
                r.published_at = ingest::parse_utc(published);
            } catch (const Error& e) {
                throw Error(e.kind(), e.message(), {.field = path + ".published_at"});
            }
        }
        json manual = defaults;
        if (const auto it = v.find("manual"); it != v.end()) {
            if (!it->is_object()) throw Error(ErrorKind::SchemaError, "expected an object", {.field = path + ".manual"});
            manual.merge_patch(*it);
        }
        req.manual.push_back(manual_from_json(manual, path + ".manual"));
        req.remote.push_back(std::move(r));
    }
    return req;
}

MetadataResult ingest_metadata(const Layout& layout, const MetadataRequest& request, ingest::Transport* transport,
                               const std::string& api_credential) {
    std::vector<ingest::VideoMetadata> incoming;
    for (std::size_t i = 0; i < request.remote.size(); ++i) {
        const std::string path = "videos[" + std::to_string(i) + "]";
        auto remote = request.remote[i];
        if (request.fetch_remote) {
            if (!transport) throw Error(ErrorKind::TransportError, "no network transport configured");
            try {
                remote = ingest::fetch_video_metadata(remote.video_id, api_credential, *transport);
            } catch (const Error& e) {
                throw e.with_video_id(remote.video_id);
            }
        }
        try {
            incoming.push_back(ingest::make_video_metadata(std::move(remote), request.manual[i]));
        } catch (const Error& e) {
            const bool manual_field = e.context().field != "video_id" && e.context().field != "url";
            throw at_path(e, manual_field ? path + ".manual" : path).with_video_id(request.remote[i].video_id);
        }
    }
    for (std::size_t i = 0; i < incoming.size(); ++i)
        for (std::size_t k = 0; k < i; ++k)
            if (incoming[k].remote.video_id == incoming[i].remote.video_id)
                throw Error(ErrorKind::DuplicateKey, "video id appears twice in the request",
                            {.video_id = incoming[i].remote.video_id, .field = "videos[" + std::to_string(i) + "].video_id"});

    MetadataResult result;
    if (fs::exists(layout.metadata())) result.videos = ingest::read_metadata_csv(read_file(layout.metadata()));
    for (auto& v : incoming) {
        auto it = std::find_if(result.videos.begin(), result.videos.end(),
                               [&](const auto& o) { return o.remote.video_id == v.remote.video_id; });
        if (it != result.videos.end())
            *it = std::move(v);
        else
            result.videos.push_back(std::move(v));
    }
    fs::create_directories(layout.root);
    write_file_atomic(layout.metadata(), ingest::write_metadata_csv(result.videos));
    result.collisions = ingest::find_tag_collisions(result.videos);
    return result;
}

std::vector<ingest::EngagementRecord> ingest_engagement(const Layout& layout, std::string_view csv_bytes) {
    auto records = ingest::import_engagement(csv_bytes);
    fs::create_directories(layout.root);
    write_file_atomic(layout.engagement(), ingest::serialize_engagement(records));
    return records;
}

// ---------------------------------------------------------------------------
// Extraction

namespace {

extract::VideoFeatures extract_one(const Layout& layout, const ExtractItem& item, const ExtractOptions& options) {
    try {
        fs::path frames = item.frames;
        if (item.video) {
            if (!options.decoder_cmd)
                throw Error(ErrorKind::ValueError, "a media file needs a decoder command", {.field = "decoder_cmd"});
            fs::create_directories(layout.decoded());
            frames = layout.decoded() / (item.video_id + ".evf");
            extract::DecoderAdapter(*options.decoder_cmd).decode(*item.video, frames);
        }
        std::ifstream in(frames, std::ios::binary);
        if (!in) throw Error(ErrorKind::IoError, "cannot open " + frames.string(), {.field = "frames"});
        const std::string transcript = read_file(item.transcript);
        return extract::extract_features(in, transcript, options.detector, item.video_id);
    } catch (const Error& e) {
        throw e.with_video_id(item.video_id);
    }
}

}  // namespace

std::vector<extract::VideoFeatures> extract_videos(const Layout& layout, const std::vector<ExtractItem>& items,
                                                   const ExtractOptions& options, const ProgressFn& progress) {
    options.detector.validate();
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (trim(items[i].video_id).empty())
            throw Error(ErrorKind::ValueError, "empty video id", {.field = "videos[" + std::to_string(i) + "].video_id"});
        for (std::size_t k = 0; k < i; ++k)
            if (items[k].video_id == items[i].video_id)
                throw Error(ErrorKind::DuplicateKey, "video id listed twice", {.video_id = items[i].video_id});
    }

    const std::size_t n = items.size();
    std::vector<std::optional<extract::VideoFeatures>> results(n);
    std::vector<std::optional<Error>> errors(n);
    std::atomic<std::size_t> next{0};
    std::mutex progress_mutex;
    std::size_t finished = 0;

    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                results[i] = extract_one(layout, items[i], options);
            } catch (const Error& e) {
                errors[i] = e;
            } catch (const std::exception& e) {
                errors[i] = Error(ErrorKind::IoError, e.what(), {.video_id = items[i].video_id});
            }
            std::lock_guard lock(progress_mutex);
            ++finished;
            if (progress) progress(finished, n);
        }
    };
    const unsigned threads = static_cast<unsigned>(std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    for (const auto& e : errors)
        if (e) throw *e;
    std::vector<extract::VideoFeatures> out;
    out.reserve(n);
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

std::vector<extract::VideoFeatures> store_features(const Layout& layout,
                                                   const std::vector<extract::VideoFeatures>& features) {
    std::vector<extract::VideoFeatures> table;
    if (fs::exists(layout.features())) table = extract::read_features_csv(read_file(layout.features()));
    extract::upsert_features(table, features);
    fs::create_directories(layout.root);
    write_file_atomic(layout.features(), extract::write_features_csv(table));
    return table;
}

json to_json(const extract::VideoFeatures& f) {
    return {{"video_id", f.video_id},
            {"duration_min", f.duration_min},
            {"word_count", f.word_count},
            {"speaking_speed_wpm", f.speaking_speed_wpm},
            {"scene_count", f.scene_count},
            {"scene_rate_spm", f.scene_rate_spm}};
}

extract::SceneDetectorConfig detector_from_json(const json& j) {
    extract::SceneDetectorConfig cfg;
    if (j.is_null()) return cfg;
    if (!j.is_object()) throw Error(ErrorKind::SchemaError, "expected an object", {.field = "detector"});
    auto number = [&](const char* key, double fallback) {
        const auto it = j.find(key);
        if (it == j.end()) return fallback;
        if (!it->is_number()) throw Error(ErrorKind::SchemaError, "expected a number", {.field = std::string("detector.") + key});
        return it->get<double>();
    };
    cfg.threshold = number("threshold", cfg.threshold);
    cfg.min_gap_s = number("min_gap_s", cfg.min_gap_s);
    if (const auto it = j.find("stride"); it != j.end()) {
        if (!it->is_number_unsigned()) throw Error(ErrorKind::SchemaError, "expected a positive integer", {.field = "detector.stride"});
        cfg.stride = it->get<std::uint64_t>();
    }
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw at_path(e, "detector");
    }
    return cfg;
}

std::uint64_t wrap_raw_frames(std::istream& raw, const fs::path& output, std::uint32_t width, std::uint32_t height,
                              std::uint32_t fps_num, std::uint32_t fps_den) {
    extract::FrameStreamHeader header{width, height, fps_num, fps_den, 0};
    header.validate();
    std::ofstream out(output, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + output.string());
    auto bytes = extract::encode_header(header);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));

    std::vector<char> frame(header.frame_size());
    while (true) {
        raw.read(frame.data(), static_cast<std::streamsize>(frame.size()));
        const auto got = static_cast<std::size_t>(raw.gcount());
        if (got == 0) break;
        if (got < frame.size())
            throw Error(ErrorKind::TruncatedStream, "input ends inside frame " + std::to_string(header.frame_count));
        out.write(frame.data(), static_cast<std::streamsize>(frame.size()));
        ++header.frame_count;
    }
    bytes = extract::encode_header(header);
    out.seekp(0);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::IoError, "failed writing " + output.string());
    return header.frame_count;
}

// ---------------------------------------------------------------------------
// Dataset, EDA, model, report

DatasetResult build_dataset(const Layout& layout) {
    require_stage(layout.metadata(), "dataset build", "ingest");
    const auto metadata = ingest::read_metadata_csv(read_file(layout.metadata()));
    std::vector<extract::VideoFeatures> features;
    if (fs::exists(layout.features())) features = extract::read_features_csv(read_file(layout.features()));
    std::vector<ingest::EngagementRecord> engagement;
    if (fs::exists(layout.engagement())) engagement = ingest::import_engagement(read_file(layout.engagement()));

    DatasetResult r;
    r.dataset = dataset::build_dataset(metadata, features, engagement);
    r.validation = dataset::validate_dataset(r.dataset);
    r.orphans = dataset::find_orphans(metadata, features, engagement);
    r.collisions = ingest::find_tag_collisions(metadata);
    write_file_atomic(layout.dataset(), dataset::write_dataset(r.dataset));
    return r;
}

json to_json(const DatasetResult& r) {
    json issues = json::array(), collisions = json::array();
    for (const auto& i : r.validation.issues)
        issues.push_back({{"video_id", i.video_id},
                          {"field", i.field},
                          {"kind", dataset::to_string(i.kind)},
                          {"message", i.message}});
    for (const auto& c : r.collisions)
        collisions.push_back({{"dataset_tag", c.dataset_tag},
                              {"first_video_id", c.first_video_id},
                              {"second_video_id", c.second_video_id},
                              {"field", c.field}});
    return json{{"total_rows", r.validation.total_rows},
                {"complete_rows", r.validation.complete_rows},
                {"issues", std::move(issues)},
                {"orphans", {{"features", r.orphans.features}, {"engagement", r.orphans.engagement}}},
                {"tag_collisions", std::move(collisions)}};
}

dataset::AnalysisDataset load_dataset(const Layout& layout) {
    require_stage(layout.dataset(), "this stage", "dataset build");
    return dataset::read_dataset(read_file(layout.dataset()));
}

eda::EDAReport run_eda(const Layout& layout, double span, bool svg) {
    require_stage(layout.dataset(), "eda", "dataset build");
    const auto report = eda::eda_report(load_dataset(layout), span);
    write_file_atomic(layout.eda(), dump_json(eda::to_json(report)));
    if (svg) {
        fs::create_directories(layout.svg_dir());
        for (const auto& [name, body] : eda::render_svgs(report)) write_file_atomic(layout.svg_dir() / name, body);
    }
    return report;
}

model::TrainResult run_train(const Layout& layout, const model::TrainOptions& options) {
    require_stage(layout.dataset(), "train", "dataset build");
    auto result = model::train(load_dataset(layout), options);
    write_file_atomic(layout.model(), dump_json(model::to_json(result)));
    return result;
}

model::TrainResult load_model(const Layout& layout) {
    require_stage(layout.model(), "this stage", "train");
    return model::train_result_from_json(read_json_file(layout.model()));
}

namespace {

// Correlations are all the report needs from EDA; they do not depend on span.
eda::EDAReport correlations_only(const dataset::AnalysisDataset& ds) {
    const auto view = dataset::modeling_view(ds);
    eda::EDAReport report;
    report.total_rows = ds.rows.size();
    report.complete_rows = view.target.size();
    std::vector<double> column(view.target.size());
    for (std::size_t j = 0; j < dataset::kFeatureCount; ++j) {
        for (std::size_t i = 0; i < column.size(); ++i) column[i] = view.features[i][j];
        eda::CorrelationResult c{std::string(dataset::kFeatureNames[j]), std::nullopt, column.size()};
        try {
            c.r = eda::pearson(column, view.target);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::ZeroVariance && e.kind() != ErrorKind::TooFewPoints) throw;
        }
        report.correlations.push_back(std::move(c));
    }
    return report;
}

}  // namespace

insight::DesignReport run_report(const Layout& layout, const insight::FeedbackConfig& config) {
    const auto trained = load_model(layout);
    const eda::EDAReport eda = fs::exists(layout.eda()) ? eda::eda_report_from_json(read_json_file(layout.eda()))
                                                        : correlations_only(load_dataset(layout));
    const auto influences = insight::rank_features(trained.model);
    auto report = insight::design_feedback(trained.model, influences, trained.vifs, eda, config);
    write_file_atomic(layout.report_json(), dump_json(insight::to_json(report)));
    write_file_atomic(layout.report_md(), insight::to_markdown(report));
    return report;
}

namespace {

std::vector<double> feature_values(const model::RegressionModel& model, const json& value, const char* key,
                                   const std::vector<double>& fallback) {
    const auto& names = model.feature_names();
    std::vector<double> out = fallback;
    if (value.is_null()) return out;
    auto number = [&](const json& v, const std::string& path) {
        if (!v.is_number()) throw Error(ErrorKind::SchemaError, "expected a number", {.field = path});
        return v.get<double>();
    };
    if (value.is_array()) {
        if (value.size() != names.size())
            throw Error(ErrorKind::LengthMismatch,
                        "expected " + std::to_string(names.size()) + " values, got " + std::to_string(value.size()),
                        {.field = key});
        for (std::size_t j = 0; j < names.size(); ++j) out[j] = number(value[j], std::string(key) + "[" + std::to_string(j) + "]");
    } else if (value.is_object()) {
        for (const auto& [name, v] : value.items()) {
            const auto it = std::find(names.begin(), names.end(), name);
            if (it == names.end())
                throw Error(ErrorKind::ValueError, "unknown feature", {.field = std::string(key) + "." + name});
            out[static_cast<std::size_t>(it - names.begin())] = number(v, std::string(key) + "." + name);
        }
    } else {
        throw Error(ErrorKind::SchemaError, "expected an array or an object", {.field = key});
    }
    return out;
}

}  // namespace

insight::WhatIfScenario run_what_if(const Layout& layout, const json& request) {
    const auto trained = load_model(layout);
    const auto& m = trained.model;
    if (!request.is_object()) throw Error(ErrorKind::SchemaError, "request body must be a JSON object");
    const auto baseline = feature_values(m, request.value("baseline", json()), "baseline", m.standardizer.means);
    const auto deltas =
        feature_values(m, request.value("deltas", json()), "deltas", std::vector<double>(m.weights.size(), 0.0));
    return insight::what_if(m, baseline, deltas);
}

std::optional<std::string> timestamp_from_env() {
    const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
    if (!epoch || !*epoch) return std::nullopt;
    const auto seconds = parse_unsigned(epoch);
    if (!seconds) throw Error(ErrorKind::ValueError, "SOURCE_DATE_EPOCH must be an integer", {.field = "SOURCE_DATE_EPOCH"});
    return ingest::format_utc(ingest::UtcTime(std::chrono::seconds(static_cast<std::int64_t>(*seconds))));
}

std::map<std::string, std::string> parse_config(std::string_view text) {
    std::map<std::string, std::string> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorKind::ValueError, "expected key=value", {.field = "config", .row = line_no});
        out[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
    }
    return out;
}

}  // namespace eduvid::workflow
