#include "trapscan/errors.hpp"

namespace trapscan {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::Io: return "IoError";
        case ErrorCode::MalformedManifest: return "MalformedManifest";
        case ErrorCode::TensorBounds: return "TensorBoundsError";
        case ErrorCode::NonFiniteEntry: return "NonFiniteEntry";
        case ErrorCode::Dimension: return "DimensionError";
        case ErrorCode::Numerical: return "NumericalError";
        case ErrorCode::Fit: return "FitError";
        case ErrorCode::Domain: return "DomainError";
        case ErrorCode::NotNormalized: return "NotNormalized";
        case ErrorCode::ZeroTrace: return "ZeroTrace";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::LayerNotFound: return "LayerNotFound";
        case ErrorCode::DegenerateSvd: return "DegenerateSVD";
        case ErrorCode::TrapNotFound: return "TrapNotFound";
        case ErrorCode::Divergence: return "DivergenceError";
        case ErrorCode::Internal: return "InternalError";
    }
    return "InternalError";
}

}  // namespace trapscan
