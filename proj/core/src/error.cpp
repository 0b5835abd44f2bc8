#include "csiloc/error.hpp"

namespace csiloc {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::InvalidArray: return "InvalidArray";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidSpan: return "InvalidSpan";
    case ErrorCode::InvalidSubset: return "InvalidSubset";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::DegenerateSpread: return "DegenerateSpread";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidBlur: return "InvalidBlur";
    case ErrorCode::InvalidArchitecture: return "InvalidArchitecture";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::InvalidDt: return "InvalidDt";
    case ErrorCode::SingularInnovation: return "SingularInnovation";
    case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::InvalidKalmanConfig: return "InvalidKalmanConfig";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::UnknownAntennaCount: return "UnknownAntennaCount";
    case ErrorCode::RangeMissing: return "RangeMissing";
    case ErrorCode::IncompleteGrid: return "IncompleteGrid";
    case ErrorCode::InvalidRoute: return "InvalidRoute";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::IntegrityMismatch: return "IntegrityMismatch";
  }
  return "Unknown";
}

}  // namespace csiloc
