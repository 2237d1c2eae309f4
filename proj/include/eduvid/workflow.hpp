#pragma once

#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eduvid/dataset.hpp"
#include "eduvid/eda.hpp"
#include "eduvid/error.hpp"
#include "eduvid/extract.hpp"
#include "eduvid/ingest.hpp"
#include "eduvid/insight.hpp"
#include "eduvid/model.hpp"

// Stage drivers over a project directory. The CLI and the HTTP service both go
// through these functions so the files they write are identical.
namespace eduvid::workflow {

namespace fs = std::filesystem;

struct Layout {
    fs::path root;

    fs::path metadata() const { return root / "metadata.csv"; }
    fs::path features() const { return root / "features.csv"; }
    fs::path engagement() const { return root / "engagement.csv"; }
    fs::path dataset() const { return root / "dataset.csv"; }
    fs::path eda() const { return root / "eda.json"; }
    fs::path model() const { return root / "model.json"; }
    fs::path report_json() const { return root / "report.json"; }
    fs::path report_md() const { return root / "report.md"; }
    fs::path svg_dir() const { return root / "svg"; }
    fs::path uploads() const { return root / "uploads"; }
    fs::path decoded() const { return root / "decoded"; }
};

/// Pretty-printed JSON with a trailing newline; the on-disk format of every
/// JSON artifact.
std::string dump_json(const nlohmann::json& j);
nlohmann::json read_json_file(const fs::path& path);

/// {"error": {"kind", "message", "field"?, "video_id"?, "row"?}}
nlohmann::json error_json(const Error& e);

/// Stage status per artifact: "done" when the file exists, "ready" when its
/// inputs exist, "locked" otherwise.
nlohmann::json stage_status(const Layout& layout);

// ---------------------------------------------------------------------------
// Stage 1-2: metadata and engagement

/// Request body:
///   {"manual": {...defaults}, "fetch_remote": false,
///    "videos": [{"video_id", "url"?, "title"?, "published_at"?,
///                "channel_name"?, "channel_id"?, "manual"?: {...overrides}}]}
struct MetadataRequest {
    std::vector<ingest::RemoteMetadata> remote;
    std::vector<ingest::ManualMetadata> manual;
    bool fetch_remote = false;
};

/// Throws SchemaError / ValueError with a JSON field path in context().field.
MetadataRequest parse_metadata_request(const nlohmann::json& j);
ingest::ManualMetadata manual_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json to_json(const ingest::ManualMetadata& m);

struct MetadataResult {
    std::vector<ingest::VideoMetadata> videos;  // full table after the upsert
    std::vector<ingest::TagCollision> collisions;
};

/// Fetches remote fields when requested (transport and credential required),
/// then upserts into metadata.csv by video id.
MetadataResult ingest_metadata(const Layout& layout, const MetadataRequest& request, ingest::Transport* transport,
                               const std::string& api_credential);

/// Parses an analytics export and stores it canonically as engagement.csv.
std::vector<ingest::EngagementRecord> ingest_engagement(const Layout& layout, std::string_view csv_bytes);

// ---------------------------------------------------------------------------
// Stage 2: feature extraction

struct ExtractItem {
    std::string video_id;
    fs::path frames;      // EVF1 file; produced by the decoder when `video` is set
    fs::path transcript;  // UTF-8 text
    std::optional<fs::path> video;
};

struct ExtractOptions {
    extract::SceneDetectorConfig detector;
    unsigned jobs = 1;
    std::optional<std::string> decoder_cmd;
};

/// (videos finished, total); called from worker threads, serialized.
using ProgressFn = std::function<void(std::size_t, std::size_t)>;

/// Extracts every item, `jobs` at a time. Results are in input order. If
/// several items fail, the first failing item's error is thrown.
std::vector<extract::VideoFeatures> extract_videos(const Layout& layout, const std::vector<ExtractItem>& items,
                                                   const ExtractOptions& options, const ProgressFn& progress = {});

/// Upserts into features.csv and returns the stored table.
std::vector<extract::VideoFeatures> store_features(const Layout& layout,
                                                   const std::vector<extract::VideoFeatures>& features);

nlohmann::json to_json(const extract::VideoFeatures& f);
extract::SceneDetectorConfig detector_from_json(const nlohmann::json& j);

/// Wraps raw 8-bit gray frames (width*height bytes each) into an EVF1 file.
/// Returns the frame count. Throws TruncatedStream on a partial trailing frame.
std::uint64_t wrap_raw_frames(std::istream& raw, const fs::path& output, std::uint32_t width, std::uint32_t height,
                              std::uint32_t fps_num, std::uint32_t fps_den);

// ---------------------------------------------------------------------------
// Stages 3-7

struct DatasetResult {
    dataset::AnalysisDataset dataset;
    dataset::ValidationReport validation;
    dataset::OrphanIds orphans;
    std::vector<ingest::TagCollision> collisions;
};

/// Requires metadata.csv. Missing features.csv / engagement.csv count as empty.
DatasetResult build_dataset(const Layout& layout);
nlohmann::json to_json(const DatasetResult& r);

/// Requires dataset.csv.
dataset::AnalysisDataset load_dataset(const Layout& layout);

/// Requires dataset.csv. Writes eda.json and, when `svg` is set, svg/*.svg.
eda::EDAReport run_eda(const Layout& layout, double span, bool svg);

/// Requires dataset.csv. Writes model.json.
model::TrainResult run_train(const Layout& layout, const model::TrainOptions& options);

/// Requires model.json.
model::TrainResult load_model(const Layout& layout);

/// Requires model.json. Uses eda.json when present, otherwise derives the
/// correlations from dataset.csv. Writes report.json and report.md.
insight::DesignReport run_report(const Layout& layout, const insight::FeedbackConfig& config);

/// Requires model.json. Body: {"baseline"?: [..] | {name: v}, "deltas": [..] | {name: v}}.
/// Missing baseline entries default to the training means, missing deltas to 0.
insight::WhatIfScenario run_what_if(const Layout& layout, const nlohmann::json& request);

/// Training timestamp from SOURCE_DATE_EPOCH (seconds), if set.
std::optional<std::string> timestamp_from_env();

/// Flat key=value file; '#' starts a comment line. Throws ValueError on a line
/// without '='.
std::map<std::string, std::string> parse_config(std::string_view text);

}  // namespace eduvid::workflow
