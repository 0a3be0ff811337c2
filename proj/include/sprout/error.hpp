#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sprout {

enum class ErrorCode {
    NotFound,
    InvalidArgument,
    UnparseableResponse,
    MissingField,
    Unauthorized,
    RateLimited,
    Transport,
    NonContiguousSelection,
    RootSelected,
    ModelReturnedSingleParagraph,
    EmptyRewrite,
    IntentMismatch,
    NotOnActiveChain,
    IoError,
    SchemaError,
    LengthMismatch,
    Conflict,
    BindError,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library is an Error carrying a stable code.
// `detail` holds the machine-oriented part (field name, JSON pointer, node id).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string detail = {})
        : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

// Failures of the LLM backend. Always reports how many attempts were made.
class GatewayError : public Error {
public:
    GatewayError(ErrorCode code, const std::string& message, int attempts)
        : Error(code, message, std::to_string(attempts)), attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

}  // namespace sprout
