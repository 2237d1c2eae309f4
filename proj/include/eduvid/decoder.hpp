#pragma once

#include <filesystem>
#include <string>

#include "eduvid/extract.hpp"

namespace eduvid::extract {

/// Runs a user-supplied shell command that converts a media file into an EVF1
/// stream. The template must contain the placeholders {input} and {output};
/// both are substituted with single-quoted paths.
///
///   ffmpeg -v error -i {input} -vf scale=160:90,format=gray -f rawvideo -
///     | eduvid evf-wrap --width 160 --height 90 --fps 25/1 --output {output}
class DecoderAdapter {
public:
    /// Throws ValueError when a placeholder is missing.
    explicit DecoderAdapter(std::string command_template);

    std::string render(const std::filesystem::path& input, const std::filesystem::path& output) const;

    /// Runs the command and validates the EVF1 header it produced. Throws
    /// DecoderError when the command fails or leaves no usable output.
    FrameStreamHeader decode(const std::filesystem::path& input, const std::filesystem::path& output) const;

    const std::string& command_template() const noexcept { return template_; }

private:
    std::string template_;
};

std::string shell_quote(std::string_view text);

}  // namespace eduvid::extract
