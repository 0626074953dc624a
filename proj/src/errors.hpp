#pragma once

#include <stdexcept>
#include <string>

namespace ssk {

enum class ErrorKind {
  InvalidArgument,
  ShapeMismatch,
  Io,
  MalformedHeader,
  TruncatedPayload,
  UnsupportedDtype,
  VersionMismatch,
  Corruption,
  State,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

}  // namespace ssk
