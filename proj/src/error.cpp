#include "nlos/error.hpp"

namespace nlos {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::invariant_violation: return "invariant_violation";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::degenerate_geometry: return "degenerate_geometry";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::missing_file: return "missing_file";
    case ErrorCode::size_mismatch: return "size_mismatch";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::io_failure: return "io_failure";
  }
  return "unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::degenerate_geometry:
    case ErrorCode::non_finite:
    case ErrorCode::io_failure:
      return false;
    default:
      return true;
  }
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace nlos
