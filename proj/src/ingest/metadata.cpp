#include <array>
#include <cctype>
#include <cstdio>
#include <map>

#include "eduvid/csv.hpp"
#include "eduvid/error.hpp"
#include "eduvid/ingest.hpp"

namespace eduvid::ingest {

namespace {

bool is_ascii_alnum(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

int parse_fixed(std::string_view s, std::size_t pos, std::size_t len) {
    if (pos + len > s.size()) return -1;
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9') return -1;
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

}  // namespace

UtcTime parse_utc(std::string_view text) {
    using namespace std::chrono;
    auto fail = [&]() -> Error {
        return Error(ErrorKind::ValueError, "invalid UTC timestamp '" + std::string(text) + "'",
                     {.field = "published_at"});
    };
    auto s = trim(text);
    if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
        s[13] != ':' || s[16] != ':')
        throw fail();
    int y = parse_fixed(s, 0, 4), mo = parse_fixed(s, 5, 2), d = parse_fixed(s, 8, 2);
    int h = parse_fixed(s, 11, 2), mi = parse_fixed(s, 14, 2), se = parse_fixed(s, 17, 2);
    if (y < 0 || mo < 0 || d < 0 || h < 0 || mi < 0 || se < 0 || h > 23 || mi > 59 || se > 60)
        throw fail();
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw fail();

    std::size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;  // sub-second precision dropped
    }
    seconds offset{0};
    if (pos == s.size()) {
        // no zone designator: already UTC
    } else if (s[pos] == 'Z' && pos + 1 == s.size()) {
    } else if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() && s[pos + 3] == ':') {
        int oh = parse_fixed(s, pos + 1, 2), om = parse_fixed(s, pos + 4, 2);
        if (oh < 0 || om < 0) throw fail();
        offset = hours{oh} + minutes{om};
        if (s[pos] == '-') offset = -offset;
    } else {
        throw fail();
    }
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{se} - offset;
}

std::string format_utc(UtcTime t) {
    using namespace std::chrono;
    auto day_point = floor<days>(t);
    year_month_day ymd{day_point};
    hh_mm_ss hms{t - day_point};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

std::string watch_url(std::string_view video_id) {
    return "https://www.youtube.com/watch?v=" + std::string(video_id);
}

void RemoteMetadata::validate() const {
    if (video_id.empty()) throw Error(ErrorKind::ValueError, "video_id is empty", {.field = "video_id"});
    if (url.find(video_id) == std::string::npos)
        throw Error(ErrorKind::ValueError, "url does not contain the video id",
                    {.video_id = video_id, .field = "url"});
}

std::string_view to_string(VideoType type) noexcept {
    switch (type) {
        case VideoType::Lecture: return "Lecture";
        case VideoType::Workshop: return "Workshop";
        case VideoType::LabDemo: return "LabDemo";
        case VideoType::Other: return "Other";
    }
    return "Other";
}

VideoType parse_video_type(std::string_view text) {
    std::string key = normalize_tag_component(text);
    if (key == "lecture") return VideoType::Lecture;
    if (key == "workshop") return VideoType::Workshop;
    if (key == "labdemo") return VideoType::LabDemo;
    if (key == "other") return VideoType::Other;
    throw Error(ErrorKind::ValueError,
                "unknown video type '" + std::string(text) + "' (expected Lecture, Workshop, LabDemo or Other)",
                {.field = "video_type"});
}

void ManualMetadata::validate() const {
    const std::array<std::pair<std::string_view, const std::string*>, 6> fields{{
        {"institution_name", &institution_name},
        {"speaker_name", &speaker_name},
        {"course_code", &course_code},
        {"course_name", &course_name},
        {"unit_level", &unit_level},
        {"subject_area", &subject_area},
    }};
    for (const auto& [name, value] : fields)
        if (trim(*value).empty())
            throw Error(ErrorKind::ValueError, "must not be empty", {.field = std::string(name)});
    if (year < 1990 || year > 2100)
        throw Error(ErrorKind::ValueError, "year " + std::to_string(year) + " outside [1990, 2100]",
                    {.field = "year"});
}

bool DatasetTag::is_valid(std::string_view text) noexcept {
    if (text.empty() || text.front() == '_' || text.back() == '_') return false;
    char prev = 0;
    for (char c : text) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
        if (!ok || (c == '_' && prev == '_')) return false;
        prev = c;
    }
    return true;
}

DatasetTag DatasetTag::from_string(std::string text) {
    if (!is_valid(text))
        throw Error(ErrorKind::ValueError, "'" + text + "' is not a valid dataset tag",
                    {.field = "dataset_tag"});
    return DatasetTag(std::move(text));
}

std::string normalize_tag_component(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text)
        if (is_ascii_alnum(c)) out.push_back(ascii_lower(c));
    return out;
}

DatasetTag make_dataset_tag(const ManualMetadata& manual) {
    const std::array<std::pair<std::string_view, std::string_view>, 6> parts{{
        {"institution_name", manual.institution_name},
        {"course_code", manual.course_code},
        {"video_type", to_string(manual.video_type)},
        {"unit_level", manual.unit_level},
        {"speaker_name", manual.speaker_name},
        {"year", {}},
    }};
    std::string tag;
    for (const auto& [name, raw] : parts) {
        std::string piece = name == "year" ? std::to_string(manual.year) : normalize_tag_component(raw);
        if (piece.empty())
            throw Error(ErrorKind::EmptyComponent,
                        "'" + std::string(raw) + "' has no letters or digits", {.field = std::string(name)});
        if (!tag.empty()) tag.push_back('_');
        tag += piece;
    }
    return DatasetTag::from_string(std::move(tag));
}

VideoMetadata make_video_metadata(RemoteMetadata remote, ManualMetadata manual) {
    remote.validate();
    try {
        manual.validate();
    } catch (const Error& e) {
        throw e.with_video_id(remote.video_id);
    }
    DatasetTag tag = make_dataset_tag(manual);
    return VideoMetadata{std::move(tag), std::move(remote), std::move(manual)};
}

std::vector<TagCollision> find_tag_collisions(std::span<const VideoMetadata> videos) {
    std::vector<TagCollision> out;
    std::map<std::string, const VideoMetadata*> first_by_tag;
    for (const auto& v : videos) {
        auto [it, inserted] = first_by_tag.emplace(v.dataset_tag.value(), &v);
        if (inserted) continue;
        const ManualMetadata& a = it->second->manual;
        const ManualMetadata& b = v.manual;
        const std::array<std::tuple<std::string_view, const std::string*, const std::string*>, 6> fields{{
            {"institution_name", &a.institution_name, &b.institution_name},
            {"speaker_name", &a.speaker_name, &b.speaker_name},
            {"course_code", &a.course_code, &b.course_code},
            {"course_name", &a.course_name, &b.course_name},
            {"unit_level", &a.unit_level, &b.unit_level},
            {"subject_area", &a.subject_area, &b.subject_area},
        }};
        for (const auto& [name, lhs, rhs] : fields) {
            if (*lhs != *rhs) {
                out.push_back({v.dataset_tag.value(), it->second->remote.video_id, v.remote.video_id,
                               std::string(name)});
                break;
            }
        }
    }
    return out;
}

namespace {

constexpr std::array<std::string_view, 15> kMetadataColumns{
    "dataset_tag", "video_id",     "institution_name", "speaker_name", "course_code",
    "course_name", "unit_level",   "year",             "video_type",   "subject_area",
    "video_url",   "title",        "published_at",     "channel_name", "channel_id",
};

}  // namespace

std::string write_metadata_csv(std::span<const VideoMetadata> videos) {
    std::string out;
    std::vector<std::string> row(kMetadataColumns.begin(), kMetadataColumns.end());
    csv::append_row(out, row);
    for (const auto& v : videos) {
        row = {v.dataset_tag.value(),
               v.remote.video_id,
               v.manual.institution_name,
               v.manual.speaker_name,
               v.manual.course_code,
               v.manual.course_name,
               v.manual.unit_level,
               std::to_string(v.manual.year),
               std::string(to_string(v.manual.video_type)),
               v.manual.subject_area,
               v.remote.url,
               v.remote.title,
               format_utc(v.remote.published_at),
               v.remote.channel_name,
               v.remote.channel_id};
        csv::append_row(out, row);
    }
    return out;
}

std::vector<VideoMetadata> read_metadata_csv(std::string_view text) {
    auto table = csv::Table::parse(text);
    std::array<std::size_t, kMetadataColumns.size()> idx{};
    for (std::size_t i = 0; i < kMetadataColumns.size(); ++i) idx[i] = table.require(kMetadataColumns[i]);

    std::vector<VideoMetadata> out;
    out.reserve(table.rows().size());
    for (std::size_t r = 0; r < table.rows().size(); ++r) {
        auto cell = [&](std::size_t col) { return std::string(table.cell(r, idx[col])); };
        try {
            RemoteMetadata remote{cell(1), cell(10), cell(11), parse_utc(cell(12)), cell(13), cell(14)};
            auto year = parse_number(cell(7));
            if (!year || *year != static_cast<int>(*year))
                throw Error(ErrorKind::ValueError, "year is not an integer", {.field = "year"});
            ManualMetadata manual{cell(2), cell(3), cell(4), cell(5), cell(6), static_cast<int>(*year),
                                  parse_video_type(cell(8)), cell(9)};
            out.push_back(make_video_metadata(std::move(remote), std::move(manual)));
        } catch (const Error& e) {
            ErrorContext ctx = e.context();
            ctx.row = r + 1;
            throw Error(e.kind(), e.message(), ctx);
        }
    }
    return out;
}

}  // namespace eduvid::ingest
