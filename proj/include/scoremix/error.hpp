#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace smx {

enum class ErrorCode {
  invalid_argument,
  parse_error,
  io_error,
  degenerate_input,
  out_of_range,
  non_finite,
};

std::string_view to_string(ErrorCode code);

/// Domain error raised by every module. `context` carries the location
/// (row/column, index, step) that the caller needs to act on the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string context = {})
      : std::runtime_error(message), code_(code), context_(std::move(context)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& context() const noexcept { return context_; }

 private:
  ErrorCode code_;
  std::string context_;
};

}  // namespace smx
