#pragma once

#include <stdexcept>
#include <string>

namespace l2h {

enum class ErrorCode {
  missing_file,
  schema_error,
  out_of_bounds_point,
  invalid_sigma,
  infeasible_packing,
  negative_shift,
  shape_error,
  non_integer_factor,
  shape_mismatch,
  dim_mismatch,
  unknown_strategy,
  bad_dims,
  non_finite_loss,
  crop_too_large,
  diverged_training,
  empty_eval_set,
  model_not_loaded,
  config_error,
  io_error,
};

const char* error_code_name(ErrorCode code);

// Single exception type for the whole library; `code` selects the failure
// class and maps to the CLI exit code (config_error -> 2, everything else -> 3).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace l2h
