#include "eduvid/error.hpp"

#include <utility>

namespace eduvid {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::NotFound: return "NotFound";
        case ErrorKind::AuthError: return "AuthError";
        case ErrorKind::TransportError: return "TransportError";
        case ErrorKind::EmptyComponent: return "EmptyComponent";
        case ErrorKind::SchemaError: return "SchemaError";
        case ErrorKind::ValueError: return "ValueError";
        case ErrorKind::BadMagic: return "BadMagic";
        case ErrorKind::TruncatedStream: return "TruncatedStream";
        case ErrorKind::HeaderError: return "HeaderError";
        case ErrorKind::EmptyStream: return "EmptyStream";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::EncodingError: return "EncodingError";
        case ErrorKind::ZeroDuration: return "ZeroDuration";
        case ErrorKind::DecoderError: return "DecoderError";
        case ErrorKind::DuplicateKey: return "DuplicateKey";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::ZeroVariance: return "ZeroVariance";
        case ErrorKind::TooFewPoints: return "TooFewPoints";
        case ErrorKind::SpanTooSmall: return "SpanTooSmall";
        case ErrorKind::TooFewCompleteRows: return "TooFewCompleteRows";
        case ErrorKind::ZeroVarianceColumn: return "ZeroVarianceColumn";
        case ErrorKind::TooFewRows: return "TooFewRows";
        case ErrorKind::RankDeficient: return "RankDeficient";
        case ErrorKind::NonFiniteInput: return "NonFiniteInput";
        case ErrorKind::ZeroVarianceTarget: return "ZeroVarianceTarget";
        case ErrorKind::StageOrderViolation: return "StageOrderViolation";
        case ErrorKind::UnknownResource: return "UnknownResource";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

bool is_io_kind(ErrorKind kind) noexcept {
    return kind == ErrorKind::IoError || kind == ErrorKind::TransportError ||
           kind == ErrorKind::DecoderError;
}

namespace {

std::string compose(ErrorKind kind, const std::string& message, const ErrorContext& ctx) {
    std::string out(to_string(kind));
    if (!ctx.video_id.empty()) out += " [video " + ctx.video_id + "]";
    if (ctx.row) out += " at row " + std::to_string(*ctx.row);
    if (!ctx.field.empty()) out += " (" + ctx.field + ")";
    out += ": ";
    out += message;
    return out;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& message, ErrorContext context)
    : std::runtime_error(compose(kind, message, context)),
      kind_(kind),
      message_(message),
      context_(std::move(context)) {}

Error Error::with_video_id(std::string video_id) const {
    ErrorContext ctx = context_;
    ctx.video_id = std::move(video_id);
    return Error(kind_, message_, std::move(ctx));
}

}  // namespace eduvid
