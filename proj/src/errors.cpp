#include "qsr/errors.hpp"

namespace qsr {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::invalid_state: return "invalid_state";
    case ErrorCode::fdr_conflict: return "fdr_conflict";
    case ErrorCode::step_constraint: return "step_constraint";
    case ErrorCode::numerical_failure: return "numerical_failure";
    case ErrorCode::config_invalid: return "config_invalid";
    case ErrorCode::io_failure: return "io_failure";
  }
  return "unknown";
}

}  // namespace qsr
