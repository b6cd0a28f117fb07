#pragma once

#include <stdexcept>
#include <string>

namespace acm {

enum class ErrorCode {
  shape_mismatch,
  rank_error,
  kernel_too_large,
  zero_vector,
  io_error,
  format_error,
  missing_box,
  non_positive_box,
  non_scalar_loss,
  disconnected_loss,
  label_out_of_range,
  empty_exterior,
  non_positive_max,
  too_many_classes,
  empty_dataset,
  invalid_argument,
  check_failed,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (and the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace acm
