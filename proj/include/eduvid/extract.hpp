#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eduvid::extract {

// ---------------------------------------------------------------------------
// EVF1 frame container
//
//   "EVF1" | u32 width | u32 height | u32 fps_num | u32 fps_den | u64 frame_count
//   followed by frame_count frames of width*height bytes (8-bit gray, row-major).
// All integers little-endian.

inline constexpr std::string_view kEvfMagic = "EVF1";
inline constexpr std::size_t kEvfHeaderSize = 28;

struct FrameStreamHeader {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t fps_num = 0;
    std::uint32_t fps_den = 0;
    std::uint64_t frame_count = 0;

    /// Throws HeaderError on a zero dimension or zero fps term.
    void validate() const;
    std::size_t frame_size() const noexcept { return std::size_t{width} * height; }
    /// Presentation time of frame `index` in seconds.
    double seconds_at(std::uint64_t index) const noexcept;

    bool operator==(const FrameStreamHeader&) const = default;
};

struct Frame {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> pixels;

    Frame() = default;
    Frame(std::uint32_t w, std::uint32_t h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(std::size_t{w} * h, fill) {}
    Frame(std::uint32_t w, std::uint32_t h, std::vector<std::uint8_t> px);
};

std::string encode_header(const FrameStreamHeader& header);
FrameStreamHeader decode_header(std::span<const std::uint8_t> bytes);

/// Streaming reader: holds one frame at a time regardless of frame_count.
class FrameReader {
public:
    /// Reads and validates the header. Throws BadMagic, HeaderError or
    /// TruncatedStream.
    explicit FrameReader(std::istream& source);

    const FrameStreamHeader& header() const noexcept { return header_; }

    /// Fills `frame` with the next frame (reusing its storage). Returns false
    /// after frame_count frames; throws TruncatedStream if the data ends early.
    bool next(Frame& frame);

    std::uint64_t frames_read() const noexcept { return read_; }

private:
    std::istream& source_;
    FrameStreamHeader header_;
    std::uint64_t read_ = 0;
};

class FrameWriter {
public:
    FrameWriter(std::ostream& sink, const FrameStreamHeader& header);
    void write(const Frame& frame);
    std::uint64_t frames_written() const noexcept { return written_; }

private:
    std::ostream& sink_;
    FrameStreamHeader header_;
    std::uint64_t written_ = 0;
};

/// Header of an EVF1 file on disk, checked against the file size.
FrameStreamHeader probe_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Features

/// (frame_count * fps_den / fps_num) / 60. Throws EmptyStream when
/// frame_count is 0 and HeaderError for a zero fps term.
double compute_duration(std::uint64_t frame_count, std::uint32_t fps_num, std::uint32_t fps_den);

/// Mean absolute pixel difference scaled to [0, 1].
double frame_difference(const Frame& a, const Frame& b);

struct SceneEvent {
    std::uint64_t frame_index = 0;  // first frame of the new scene
    double diff_score = 0.0;
    double timestamp_s = 0.0;

    bool operator==(const SceneEvent&) const = default;
};

struct SceneDetectorConfig {
    double threshold = 0.12;
    double min_gap_s = 1.0;
    std::uint64_t stride = 1;

    void validate() const;
};

/// Incremental hard-cut detector. Feed every frame in order; only frames whose
/// index is a multiple of `stride` are compared with the previous sampled frame.
class SceneDetector {
public:
    SceneDetector(const FrameStreamHeader& header, const SceneDetectorConfig& config);

    void push(std::uint64_t frame_index, const Frame& frame);
    const std::vector<SceneEvent>& events() const noexcept { return events_; }

private:
    FrameStreamHeader header_;
    SceneDetectorConfig config_;
    Frame previous_;
    bool have_previous_ = false;
    std::vector<SceneEvent> events_;
};

std::vector<SceneEvent> detect_scene_transitions(FrameReader& frames, const SceneDetectorConfig& config);

/// Whitespace-delimited tokens containing at least one Unicode letter or digit.
/// Throws EncodingError on invalid UTF-8.
std::uint64_t count_words(std::string_view transcript);

struct Rates {
    double speaking_speed_wpm = 0.0;
    double scene_rate_spm = 0.0;
};

Rates derive_rates(double duration_min, std::uint64_t word_count, std::uint64_t scene_count);

/// Five per-video features. scene_count is the number of detected transitions
/// (a video with one cut has scene_count 1, not 2 segments).
struct VideoFeatures {
    std::string video_id;
    double duration_min = 0.0;
    std::uint64_t word_count = 0;
    double speaking_speed_wpm = 0.0;
    std::uint64_t scene_count = 0;
    double scene_rate_spm = 0.0;

    bool operator==(const VideoFeatures&) const = default;
};

/// Reads the stream once, detecting cuts as frames arrive. Errors carry the
/// video id.
VideoFeatures extract_features(std::istream& frame_stream, std::string_view transcript,
                               const SceneDetectorConfig& config, const std::string& video_id);

/// Columns: video_id, duration_min, word_count, speaking_speed_wpm,
/// scene_count, scene_rate_spm.
std::string write_features_csv(std::span<const VideoFeatures> features);
std::vector<VideoFeatures> read_features_csv(std::string_view text);

/// Replaces rows with matching video ids in place and appends the rest.
void upsert_features(std::vector<VideoFeatures>& table, std::span<const VideoFeatures> updates);

}  // namespace eduvid::extract
