#include "sprout/error.hpp"

namespace sprout {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::UnparseableResponse: return "UnparseableResponse";
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::Unauthorized: return "Unauthorized";
        case ErrorCode::RateLimited: return "RateLimited";
        case ErrorCode::Transport: return "Transport";
        case ErrorCode::NonContiguousSelection: return "NonContiguousSelection";
        case ErrorCode::RootSelected: return "RootSelected";
        case ErrorCode::ModelReturnedSingleParagraph: return "ModelReturnedSingleParagraph";
        case ErrorCode::EmptyRewrite: return "EmptyRewrite";
        case ErrorCode::IntentMismatch: return "IntentMismatch";
        case ErrorCode::NotOnActiveChain: return "NotOnActiveChain";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::Conflict: return "Conflict";
        case ErrorCode::BindError: return "BindError";
    }
    return "Unknown";
}

}  // namespace sprout
