#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace csiloc {

enum class ErrorCode {
  // csi_data
  DegenerateGeometry,
  InvalidArray,
  ShapeMismatch,
  InvalidSpan,
  InvalidSubset,
  TooFewRows,
  ParseError,
  RangeError,
  // image_synth
  DegenerateSpread,
  LengthMismatch,
  InvalidBlur,
  // hynn
  InvalidArchitecture,
  NonFiniteActivation,
  NonFiniteGradient,
  Diverged,
  EmptyBatch,
  // state_est
  InvalidDt,
  SingularInnovation,
  NonMonotonicTime,
  InvalidKalmanConfig,
  // sim_harness
  OutOfBounds,
  EmptyTable,
  UnknownAntennaCount,
  RangeMissing,
  IncompleteGrid,
  InvalidRoute,
  // pipeline
  ConfigError,
  IoError,
  IntegrityMismatch,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above; the
/// CLI maps codes onto process exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace csiloc
