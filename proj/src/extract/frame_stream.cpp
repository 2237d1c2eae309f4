#include <array>
#include <cstring>
#include <fstream>

#include "eduvid/error.hpp"
#include "eduvid/extract.hpp"

namespace eduvid::extract {

namespace {

// Guards allocation against corrupt headers: 1 GiB per frame.
constexpr std::uint64_t kMaxFrameBytes = std::uint64_t{1} << 30;

template <typename T>
void put_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[offset + i]) << (8 * i);
    return value;
}

}  // namespace

void FrameStreamHeader::validate() const {
    if (width == 0 || height == 0)
        throw Error(ErrorKind::HeaderError, "zero frame dimension (" + std::to_string(width) + "x" +
                                                std::to_string(height) + ")");
    if (fps_num == 0 || fps_den == 0)
        throw Error(ErrorKind::HeaderError,
                    "zero frame-rate term (" + std::to_string(fps_num) + "/" + std::to_string(fps_den) + ")");
    if (std::uint64_t{width} * height > kMaxFrameBytes)
        throw Error(ErrorKind::HeaderError, "frame size exceeds 1 GiB");
}

double FrameStreamHeader::seconds_at(std::uint64_t index) const noexcept {
    return static_cast<double>(static_cast<unsigned __int128>(index) * fps_den) / static_cast<double>(fps_num);
}

Frame::Frame(std::uint32_t w, std::uint32_t h, std::vector<std::uint8_t> px)
    : width(w), height(h), pixels(std::move(px)) {
    if (pixels.size() != std::size_t{w} * h)
        throw Error(ErrorKind::DimensionMismatch, "pixel buffer holds " + std::to_string(pixels.size()) +
                                                      " bytes, expected " + std::to_string(std::size_t{w} * h));
}

std::string encode_header(const FrameStreamHeader& header) {
    std::string out(kEvfMagic);
    put_le(out, header.width);
    put_le(out, header.height);
    put_le(out, header.fps_num);
    put_le(out, header.fps_den);
    put_le(out, header.frame_count);
    return out;
}

FrameStreamHeader decode_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kEvfMagic.size() ||
        std::memcmp(bytes.data(), kEvfMagic.data(), kEvfMagic.size()) != 0)
        throw Error(ErrorKind::BadMagic, "stream does not start with \"EVF1\"");
    if (bytes.size() < kEvfHeaderSize)
        throw Error(ErrorKind::TruncatedStream, "header is " + std::to_string(bytes.size()) + " bytes, expected 28");
    FrameStreamHeader h;
    h.width = get_le<std::uint32_t>(bytes, 4);
    h.height = get_le<std::uint32_t>(bytes, 8);
    h.fps_num = get_le<std::uint32_t>(bytes, 12);
    h.fps_den = get_le<std::uint32_t>(bytes, 16);
    h.frame_count = get_le<std::uint64_t>(bytes, 20);
    h.validate();
    return h;
}

FrameReader::FrameReader(std::istream& source) : source_(source) {
    std::array<std::uint8_t, kEvfHeaderSize> buf{};
    source_.read(reinterpret_cast<char*>(buf.data()), buf.size());
    header_ = decode_header(std::span(buf.data(), static_cast<std::size_t>(source_.gcount())));
}

bool FrameReader::next(Frame& frame) {
    if (read_ >= header_.frame_count) return false;
    const std::size_t size = header_.frame_size();
    frame.width = header_.width;
    frame.height = header_.height;
    frame.pixels.resize(size);
    source_.read(reinterpret_cast<char*>(frame.pixels.data()), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(source_.gcount()) != size)
        throw Error(ErrorKind::TruncatedStream, "frame " + std::to_string(read_) + " of " +
                                                    std::to_string(header_.frame_count) + " is incomplete");
    ++read_;
    return true;
}

FrameWriter::FrameWriter(std::ostream& sink, const FrameStreamHeader& header) : sink_(sink), header_(header) {
    header_.validate();
    auto bytes = encode_header(header_);
    sink_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void FrameWriter::write(const Frame& frame) {
    if (frame.width != header_.width || frame.height != header_.height ||
        frame.pixels.size() != header_.frame_size())
        throw Error(ErrorKind::DimensionMismatch, "frame does not match stream dimensions");
    if (written_ >= header_.frame_count)
        throw Error(ErrorKind::HeaderError, "more frames than declared in the header");
    sink_.write(reinterpret_cast<const char*>(frame.pixels.data()), static_cast<std::streamsize>(frame.pixels.size()));
    ++written_;
}

FrameStreamHeader probe_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    FrameReader reader(in);
    const auto& h = reader.header();
    std::error_code ec;
    auto size = std::filesystem::file_size(path, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot stat " + path.string());
    const unsigned __int128 expected = kEvfHeaderSize + static_cast<unsigned __int128>(h.frame_count) * h.frame_size();
    if (size < expected)
        throw Error(ErrorKind::TruncatedStream,
                    path.string() + " holds fewer bytes than its header declares");
    return h;
}

}  // namespace eduvid::extract
