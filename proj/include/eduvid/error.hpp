#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace eduvid {

enum class ErrorKind {
    // ingest
    NotFound,
    AuthError,
    TransportError,
    EmptyComponent,
    SchemaError,
    ValueError,
    // extract
    BadMagic,
    TruncatedStream,
    HeaderError,
    EmptyStream,
    DimensionMismatch,
    EncodingError,
    ZeroDuration,
    DecoderError,
    // dataset
    DuplicateKey,
    // eda
    EmptyInput,
    LengthMismatch,
    ZeroVariance,
    TooFewPoints,
    SpanTooSmall,
    TooFewCompleteRows,
    // model
    ZeroVarianceColumn,
    TooFewRows,
    RankDeficient,
    NonFiniteInput,
    ZeroVarianceTarget,
    // workflow / service
    StageOrderViolation,
    UnknownResource,
    IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// True for kinds that describe a file-system or network failure rather than
/// bad input. The CLI maps these to exit code 2.
bool is_io_kind(ErrorKind kind) noexcept;

struct ErrorContext {
    std::string video_id;
    std::string field;
    std::optional<std::size_t> row;  // 1-based data row
};

/// Single exception type for every domain failure. Callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, ErrorContext context = {});

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& message() const noexcept { return message_; }
    const ErrorContext& context() const noexcept { return context_; }

    /// Copy of this error with the video id attached (used when a per-video
    /// step fails inside a batch).
    Error with_video_id(std::string video_id) const;

private:
    ErrorKind kind_;
    std::string message_;
    ErrorContext context_;
};

}  // namespace eduvid
