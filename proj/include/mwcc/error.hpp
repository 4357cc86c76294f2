#pragma once

#include <stdexcept>
#include <string>

namespace mwcc {

enum class ErrorCode {
  invalid_argument,
  validation,
  parse,
  budget,
  io,
  unsupported,
};

const char* error_code_name(ErrorCode code) noexcept;

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mwcc
