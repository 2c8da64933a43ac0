#pragma once

#include <stdexcept>
#include <string>

namespace adaclust {

enum class ErrorCode {
  invalid_argument,
  insufficient_samples,
  dimension_mismatch,
  non_finite,
  fewer_points_than_clusters,
  corrupt_model,
  unsupported_version,
  shape_inconsistency,
  io,
  insufficient_trials,
  no_covering_decay,
  precondition_violation,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::insufficient_samples: return "insufficient_samples";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::fewer_points_than_clusters: return "fewer_points_than_clusters";
    case ErrorCode::corrupt_model: return "corrupt_model";
    case ErrorCode::unsupported_version: return "unsupported_version";
    case ErrorCode::shape_inconsistency: return "shape_inconsistency";
    case ErrorCode::io: return "io";
    case ErrorCode::insufficient_trials: return "insufficient_trials";
    case ErrorCode::no_covering_decay: return "no_covering_decay";
    case ErrorCode::precondition_violation: return "precondition_violation";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable code so the
/// CLI can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace detail
}  // namespace adaclust
