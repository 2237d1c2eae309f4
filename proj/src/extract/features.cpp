#include <array>
#include <climits>
#include <cmath>
#include <cstdlib>
#include <unordered_map>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "eduvid/csv.hpp"
#include "eduvid/error.hpp"
#include "eduvid/extract.hpp"

namespace eduvid::extract {

double compute_duration(std::uint64_t frame_count, std::uint32_t fps_num, std::uint32_t fps_den) {
    if (frame_count == 0) throw Error(ErrorKind::EmptyStream, "stream has no frames");
    if (fps_num == 0 || fps_den == 0) throw Error(ErrorKind::HeaderError, "zero frame-rate term");
    // One rounding step: both operands are exact integers below 2^53 for any
    // realistic stream, so the quotient is the correctly rounded duration.
    const auto seconds_num = static_cast<unsigned __int128>(frame_count) * fps_den;
    const auto minutes_den = static_cast<std::uint64_t>(fps_num) * 60u;
    return static_cast<double>(seconds_num) / static_cast<double>(minutes_den);
}

double frame_difference(const Frame& a, const Frame& b) {
    if (a.width != b.width || a.height != b.height || a.pixels.size() != b.pixels.size())
        throw Error(ErrorKind::DimensionMismatch,
                    std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " + std::to_string(b.width) +
                        "x" + std::to_string(b.height));
    if (a.pixels.empty()) return 0.0;
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i)
        total += static_cast<std::uint64_t>(std::abs(int{a.pixels[i]} - int{b.pixels[i]}));
    return static_cast<double>(total) / (255.0 * static_cast<double>(a.pixels.size()));
}

void SceneDetectorConfig::validate() const {
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw Error(ErrorKind::ValueError, "threshold must be in (0, 1]", {.field = "threshold"});
    if (!(min_gap_s >= 0.0) || !std::isfinite(min_gap_s))
        throw Error(ErrorKind::ValueError, "min_gap_s must be a finite value >= 0", {.field = "min_gap_s"});
    if (stride == 0) throw Error(ErrorKind::ValueError, "stride must be >= 1", {.field = "stride"});
}

SceneDetector::SceneDetector(const FrameStreamHeader& header, const SceneDetectorConfig& config)
    : header_(header), config_(config) {
    header_.validate();
    config_.validate();
}

void SceneDetector::push(std::uint64_t frame_index, const Frame& frame) {
    if (frame_index % config_.stride != 0) return;
    if (!have_previous_) {
        previous_ = frame;
        have_previous_ = true;
        return;
    }
    const double score = frame_difference(previous_, frame);
    if (score > config_.threshold) {
        const double t = header_.seconds_at(frame_index);
        if (events_.empty() || t - events_.back().timestamp_s >= config_.min_gap_s)
            events_.push_back(SceneEvent{frame_index, score, t});
    }
    previous_.pixels.assign(frame.pixels.begin(), frame.pixels.end());
}

std::vector<SceneEvent> detect_scene_transitions(FrameReader& frames, const SceneDetectorConfig& config) {
    SceneDetector detector(frames.header(), config);
    Frame frame;
    std::uint64_t index = frames.frames_read();
    while (frames.next(frame)) detector.push(index++, frame);
    if (index == 0) throw Error(ErrorKind::EmptyStream, "stream has no frames");
    return detector.events();
}

std::uint64_t count_words(std::string_view transcript) {
    if (transcript.size() > static_cast<std::size_t>(INT32_MAX))
        throw Error(ErrorKind::ValueError, "transcript larger than 2 GiB");
    const auto* s = reinterpret_cast<const std::uint8_t*>(transcript.data());
    const auto length = static_cast<std::int32_t>(transcript.size());
    std::uint64_t words = 0;
    bool in_token = false;
    bool token_has_alnum = false;
    std::int32_t i = 0;
    while (i < length) {
        const std::int32_t start = i;
        UChar32 c;
        U8_NEXT(s, i, length, c);
        if (c < 0)
            throw Error(ErrorKind::EncodingError, "invalid UTF-8 at byte offset " + std::to_string(start));
        if (u_isUWhiteSpace(c)) {
            if (in_token && token_has_alnum) ++words;
            in_token = false;
            token_has_alnum = false;
            continue;
        }
        in_token = true;
        if (u_isalnum(c)) token_has_alnum = true;
    }
    if (in_token && token_has_alnum) ++words;
    return words;
}

Rates derive_rates(double duration_min, std::uint64_t word_count, std::uint64_t scene_count) {
    if (!(duration_min > 0.0) || !std::isfinite(duration_min))
        throw Error(ErrorKind::ZeroDuration, "duration must be positive, got " + format_number(duration_min));
    return Rates{static_cast<double>(word_count) / duration_min, static_cast<double>(scene_count) / duration_min};
}

VideoFeatures extract_features(std::istream& frame_stream, std::string_view transcript,
                               const SceneDetectorConfig& config, const std::string& video_id) {
    try {
        config.validate();
        const std::uint64_t words = count_words(transcript);
        FrameReader reader(frame_stream);
        const auto& header = reader.header();
        const double duration = compute_duration(header.frame_count, header.fps_num, header.fps_den);
        const auto events = detect_scene_transitions(reader, config);
        const auto rates = derive_rates(duration, words, events.size());
        return VideoFeatures{video_id, duration, words, rates.speaking_speed_wpm, events.size(), rates.scene_rate_spm};
    } catch (const Error& e) {
        throw e.with_video_id(video_id);
    }
}

namespace {

constexpr std::array<std::string_view, 6> kFeatureColumns{
    "video_id", "duration_min", "word_count", "speaking_speed_wpm", "scene_count", "scene_rate_spm"};

}  // namespace

std::string write_features_csv(std::span<const VideoFeatures> features) {
    std::string out;
    std::vector<std::string> row(kFeatureColumns.begin(), kFeatureColumns.end());
    csv::append_row(out, row);
    for (const auto& f : features) {
        row = {f.video_id,
               format_number(f.duration_min),
               std::to_string(f.word_count),
               format_number(f.speaking_speed_wpm),
               std::to_string(f.scene_count),
               format_number(f.scene_rate_spm)};
        csv::append_row(out, row);
    }
    return out;
}

std::vector<VideoFeatures> read_features_csv(std::string_view text) {
    auto table = csv::Table::parse(text);
    std::array<std::size_t, kFeatureColumns.size()> idx{};
    for (std::size_t i = 0; i < kFeatureColumns.size(); ++i) idx[i] = table.require(kFeatureColumns[i]);

    std::vector<VideoFeatures> out;
    for (std::size_t r = 0; r < table.rows().size(); ++r) {
        const std::string id(trim(table.cell(r, idx[0])));
        auto fail = [&](std::size_t col) {
            return Error(ErrorKind::ValueError, "'" + std::string(table.cell(r, idx[col])) + "' is not valid",
                         {.video_id = id, .field = std::string(kFeatureColumns[col]), .row = r + 1});
        };
        auto real = [&](std::size_t col) {
            auto v = parse_number(table.cell(r, idx[col]));
            if (!v) throw fail(col);
            return *v;
        };
        auto count = [&](std::size_t col) {
            auto v = parse_unsigned(table.cell(r, idx[col]));
            if (!v) throw fail(col);
            return *v;
        };
        if (id.empty()) throw fail(0);
        out.push_back(VideoFeatures{id, real(1), count(2), real(3), count(4), real(5)});
    }
    return out;
}

void upsert_features(std::vector<VideoFeatures>& table, std::span<const VideoFeatures> updates) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < table.size(); ++i) index.emplace(table[i].video_id, i);
    for (const auto& u : updates) {
        if (auto it = index.find(u.video_id); it != index.end()) {
            table[it->second] = u;
        } else {
            index.emplace(u.video_id, table.size());
            table.push_back(u);
        }
    }
}

}  // namespace eduvid::extract
