#pragma once

#include <stdexcept>
#include <string>

namespace fkc {

enum class ErrorKind {
  IllFormed,
  ExtentMismatch,
  InvalidArity,
  InvalidDegree,
  ShapeMismatch,
  DimensionMismatch,
  Unsupported,
  ValueShapeMismatch,
  ArityMismatch,
  UnsupportedCell,
  NonlinearArgument,
  TooManyIndices,
  UnsplittableConcatenate,
  UnloweredNode,
  UnsupportedFunction,
  UnboundVariable,
  IndexOutOfRange,
  Usage,
};

const char* to_string(ErrorKind k);

// Usage and validation errors, as opposed to failures inside the compiler.
bool is_usage_error(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, const std::string& pass = "")
      : std::runtime_error(std::string(to_string(kind)) + ": " + (pass.empty() ? "" : pass + ": ") + what),
        kind_(kind),
        detail_(what),
        pass_(pass) {}
  ErrorKind kind() const { return kind_; }
  const std::string& detail() const { return detail_; }
  // Name of the compiler pass that raised the error, if any.
  const std::string& pass() const { return pass_; }

 private:
  ErrorKind kind_;
  std::string detail_;
  std::string pass_;
};

}  // namespace fkc
