#include "eduvid/decoder.hpp"

#include <cstdlib>
#include <sys/wait.h>

#include "eduvid/error.hpp"

namespace eduvid::extract {

namespace {

constexpr std::string_view kInput = "{input}";
constexpr std::string_view kOutput = "{output}";

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

}  // namespace

std::string shell_quote(std::string_view text) {
    std::string out = "'";
    for (char c : text) {
        if (c == '\'')
            out += "'\\''";
        else
            out.push_back(c);
    }
    out.push_back('\'');
    return out;
}

DecoderAdapter::DecoderAdapter(std::string command_template) : template_(std::move(command_template)) {
    if (template_.find(kInput) == std::string::npos || template_.find(kOutput) == std::string::npos)
        throw Error(ErrorKind::ValueError, "decoder command must contain {input} and {output}",
                    {.field = "decoder_cmd"});
}

std::string DecoderAdapter::render(const std::filesystem::path& input, const std::filesystem::path& output) const {
    std::string cmd = template_;
    replace_all(cmd, kInput, shell_quote(input.string()));
    replace_all(cmd, kOutput, shell_quote(output.string()));
    return cmd;
}

FrameStreamHeader DecoderAdapter::decode(const std::filesystem::path& input,
                                         const std::filesystem::path& output) const {
    std::error_code ec;
    std::filesystem::remove(output, ec);
    const std::string cmd = render(input, output);
    const int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw Error(ErrorKind::DecoderError, "decoder command failed (status " + std::to_string(status) + "): " + cmd);
    if (!std::filesystem::exists(output))
        throw Error(ErrorKind::DecoderError, "decoder produced no output file " + output.string());
    try {
        return probe_file(output);
    } catch (const Error& e) {
        throw Error(ErrorKind::DecoderError, "decoder output is not a valid EVF1 stream: " + std::string(e.what()));
    }
}

}  // namespace eduvid::extract
