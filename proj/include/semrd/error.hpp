#pragma once

#include <stdexcept>
#include <string>

namespace semrd {

enum class ErrorKind {
  invalid_input,
  dimension,
  infeasible,
  io,
  corrupt,
};

/// Single exception type for the library. The kind decides the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error dimension_error(const std::string& what) { return {ErrorKind::dimension, what}; }
inline Error invalid_input(const std::string& what) { return {ErrorKind::invalid_input, what}; }

// 0 success, 2 invalid input, 3 infeasible instance, 4 I/O
inline int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::infeasible:
      return 3;
    case ErrorKind::io:
      return 4;
    default:
      return 2;
  }
}

}  // namespace semrd
