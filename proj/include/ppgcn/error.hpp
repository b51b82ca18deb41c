#pragma once

#include <stdexcept>
#include <string>

namespace ppgcn {

// Machine-readable error category; the CLI reports it as `code` in its
// stderr error JSON.
enum class ErrorCode {
  InvalidArgument,
  UnknownType,
  SchemaViolation,
  MissingNode,
  Duplicate,
  ShapeMismatch,
  NonFinite,
  Parse,
  Io,
  SignatureMismatch,
  StaleCache,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace ppgcn
