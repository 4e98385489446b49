#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nlos {

enum class ErrorCode {
  invalid_argument,
  invariant_violation,
  out_of_range,
  dimension_mismatch,
  degenerate_geometry,
  non_finite,
  missing_file,
  size_mismatch,
  parse_error,
  io_failure,
};

std::string_view to_string(ErrorCode code);

/// True for errors caused by bad inputs (files, flags, metadata) rather than
/// by a failure while computing.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace nlos
