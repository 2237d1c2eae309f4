#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eduvid::ingest {

using UtcTime = std::chrono::sys_seconds;

/// Parses "YYYY-MM-DDTHH:MM:SS[.fff](Z|+HH:MM|-HH:MM)" into UTC.
UtcTime parse_utc(std::string_view text);
/// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_utc(UtcTime t);

/// Fields returned by the hosting platform.
struct RemoteMetadata {
    std::string video_id;
    std::string url;
    std::string title;
    UtcTime published_at{};
    std::string channel_name;
    std::string channel_id;

    /// Throws ValueError when video_id is empty or url does not contain it.
    void validate() const;
    bool operator==(const RemoteMetadata&) const = default;
};

std::string watch_url(std::string_view video_id);

enum class VideoType { Lecture, Workshop, LabDemo, Other };

std::string_view to_string(VideoType type) noexcept;
/// Case-insensitive; also accepts "lab_demo" / "lab demo". Throws ValueError.
VideoType parse_video_type(std::string_view text);

/// Fields entered by the operator.
struct ManualMetadata {
    std::string institution_name;
    std::string speaker_name;
    std::string course_code;
    std::string course_name;
    std::string unit_level;
    int year = 0;
    VideoType video_type = VideoType::Lecture;
    std::string subject_area;

    /// Throws ValueError naming the offending field.
    void validate() const;
    bool operator==(const ManualMetadata&) const = default;
};

/// Cohort identifier: lowercase alphanumeric groups joined by single underscores.
class DatasetTag {
public:
    static bool is_valid(std::string_view text) noexcept;
    /// Throws ValueError if `text` does not match the tag pattern.
    static DatasetTag from_string(std::string text);

    const std::string& value() const noexcept { return value_; }
    auto operator<=>(const DatasetTag&) const = default;

private:
    explicit DatasetTag(std::string v) : value_(std::move(v)) {}
    std::string value_;
};

/// Lowercases ASCII letters and drops everything that is not [a-z0-9].
std::string normalize_tag_component(std::string_view text);

/// institution_coursecode_videotype_unitlevel_speaker_year.
/// Throws EmptyComponent when a field normalizes to "".
DatasetTag make_dataset_tag(const ManualMetadata& manual);

struct VideoMetadata {
    DatasetTag dataset_tag;
    RemoteMetadata remote;
    ManualMetadata manual;

    bool operator==(const VideoMetadata&) const = default;
};

/// Validates both halves and derives the tag.
VideoMetadata make_video_metadata(RemoteMetadata remote, ManualMetadata manual);

/// Two videos that share a tag while disagreeing on a manual field the tag does
/// not encode (or encode lossily, e.g. "Year 1" vs "Year_1").
struct TagCollision {
    std::string dataset_tag;
    std::string first_video_id;
    std::string second_video_id;
    std::string field;
};

std::vector<TagCollision> find_tag_collisions(std::span<const VideoMetadata> videos);

/// Columns: dataset_tag, video_id, institution_name, speaker_name, course_code,
/// course_name, unit_level, year, video_type, subject_area, video_url, title,
/// published_at, channel_name, channel_id.
std::string write_metadata_csv(std::span<const VideoMetadata> videos);
std::vector<VideoMetadata> read_metadata_csv(std::string_view text);

// ---------------------------------------------------------------------------
// Engagement

struct EngagementRecord {
    std::string video_id;
    double average_percentage_viewed = 0.0;
    std::optional<std::uint64_t> views;
    std::optional<std::uint64_t> likes;
    std::optional<std::uint64_t> dislikes;

    bool operator==(const EngagementRecord&) const = default;
};

/// Lowercase, runs of non-alphanumerics become one '_', trimmed of '_'.
std::string normalize_header(std::string_view header);

/// Parses an analytics CSV export. Mandatory columns video_id and
/// average_percentage_viewed (header aliases are normalized first); optional
/// views, likes, dislikes; unknown columns are ignored.
std::vector<EngagementRecord> import_engagement(std::string_view csv_bytes);
std::string serialize_engagement(std::span<const EngagementRecord> records);

// ---------------------------------------------------------------------------
// Remote fetch

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Network capability injected into fetch_video_metadata. Implementations
/// throw Error(TransportError) when no response could be obtained.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse get(const std::string& url) = 0;
};

/// Data API "videos" endpoint, part=snippet.
std::string videos_endpoint_url(std::string_view video_id, std::string_view api_key);

/// Maps items[0] of the videos.list response:
///   id                    -> video_id
///   snippet.title         -> title
///   snippet.publishedAt   -> published_at
///   snippet.channelTitle  -> channel_name
///   snippet.channelId     -> channel_id
/// and synthesizes url from the id. Throws NotFound, AuthError or
/// TransportError.
RemoteMetadata fetch_video_metadata(std::string_view video_id, std::string_view api_credential,
                                    Transport& transport);

/// Pure response mapping used by fetch_video_metadata.
RemoteMetadata parse_videos_response(std::string_view video_id, const HttpResponse& response);

}  // namespace eduvid::ingest
