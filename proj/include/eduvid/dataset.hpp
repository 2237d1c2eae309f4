#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eduvid/extract.hpp"
#include "eduvid/ingest.hpp"

namespace eduvid::dataset {

inline constexpr std::size_t kFeatureCount = 5;
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "duration_min", "word_count", "speaking_speed_wpm", "scene_count", "scene_rate_spm"};
inline constexpr std::string_view kTargetName = "average_percentage_viewed";

using FeatureVector = std::array<double, kFeatureCount>;

/// Feature values in kFeatureNames order.
FeatureVector feature_vector(const extract::VideoFeatures& f);

/// One joined video. Holds exactly the fields persisted in dataset.csv, so
/// read_dataset(write_dataset(ds)) == ds. Remote-only fields (title, channel,
/// publish date) live in metadata.csv.
struct DatasetRow {
    std::string dataset_tag;  // may violate the tag pattern when read from a hand-edited file
    std::string video_id;
    ingest::ManualMetadata manual;
    std::string video_url;
    std::optional<extract::VideoFeatures> features;
    std::optional<double> average_percentage_viewed;
    bool complete = false;

    bool operator==(const DatasetRow&) const = default;
};

/// Engagement present and every feature present and finite.
bool is_complete(const DatasetRow& row);

struct AnalysisDataset {
    std::vector<DatasetRow> rows;

    static constexpr const auto& feature_names() { return kFeatureNames; }
    static constexpr std::string_view target_name() { return kTargetName; }

    std::size_t complete_count() const;
    bool operator==(const AnalysisDataset&) const = default;
};

/// Left join on metadata (order preserved). Tags are recomputed from the
/// manual fields. Throws DuplicateKey when a source repeats a video id.
AnalysisDataset build_dataset(std::span<const ingest::VideoMetadata> metadata,
                              std::span<const extract::VideoFeatures> features,
                              std::span<const ingest::EngagementRecord> engagement);

/// Feature or engagement ids absent from the metadata (dropped by the join).
struct OrphanIds {
    std::vector<std::string> features;
    std::vector<std::string> engagement;
};

OrphanIds find_orphans(std::span<const ingest::VideoMetadata> metadata,
                       std::span<const extract::VideoFeatures> features,
                       std::span<const ingest::EngagementRecord> engagement);

enum class IssueKind { Missing, OutOfRange, NonFinite, TagPattern, TagMismatch, InvalidMetadata, Orphan };

std::string_view to_string(IssueKind kind) noexcept;

struct ValidationIssue {
    std::string video_id;
    std::string field;
    IssueKind kind;
    std::string message;

    bool operator==(const ValidationIssue&) const = default;
};

struct ValidationReport {
    std::size_t total_rows = 0;
    std::size_t complete_rows = 0;
    std::vector<ValidationIssue> issues;
};

/// Report-only: missing features or engagement (one issue each), engagement
/// outside [0, 100], non-finite or negative features, tag pattern violations and
/// tags that disagree with their manual fields.
ValidationReport validate_dataset(const AnalysisDataset& ds);

/// Columns (in order): dataset_tag, video_id, institution_name, speaker_name,
/// course_code, course_name, unit_level, year, video_type, subject_area,
/// video_url, duration_min, word_count, speaking_speed_wpm, scene_count,
/// scene_rate_spm, average_percentage_viewed. Missing values are empty cells.
std::string write_dataset(const AnalysisDataset& ds);
/// Throws SchemaError for a missing column, ValueError for unparsable cells.
AnalysisDataset read_dataset(std::string_view text);

/// Complete rows only, as plain arrays, ready for standardization.
struct ModelingView {
    std::vector<std::string> video_ids;
    std::vector<FeatureVector> features;
    std::vector<double> target;
};

/// Throws ValueError if a complete row carries a non-finite feature or an
/// engagement value outside [0, 100].
ModelingView modeling_view(const AnalysisDataset& ds);

}  // namespace eduvid::dataset
