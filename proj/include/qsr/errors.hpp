#pragma once

#include <stdexcept>
#include <string>

namespace qsr {

// Error categories. The CLI maps these one-to-one onto exit codes (see README).
enum class ErrorCode {
  dimension_mismatch = 2,
  invalid_argument = 3,
  invalid_state = 4,
  fdr_conflict = 5,
  step_constraint = 6,
  numerical_failure = 7,
  config_invalid = 8,
  io_failure = 9,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

}  // namespace qsr
