#pragma once

#include <stdexcept>
#include <string>

namespace trapscan {

enum class ErrorCode {
    Io,
    MalformedManifest,
    TensorBounds,
    NonFiniteEntry,
    Dimension,
    Numerical,
    Fit,
    Domain,
    NotNormalized,
    ZeroTrace,
    ShapeMismatch,
    LayerNotFound,
    DegenerateSvd,
    TrapNotFound,
    Divergence,
    Internal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace trapscan
