#pragma once

#include <stdexcept>
#include <string>

namespace wtl {

/// Error classes surfaced by the library. The CLI maps each to a stable exit code.
enum class ErrorKind {
  invalid_argument,
  io,
  format,
  numeric,
  no_line,
  cut_failure,
  no_closure,
  not_closed,
  fill_failure,
  invalid_ground_truth,
  empty_result,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::io: return "io-error";
    case ErrorKind::format: return "format-error";
    case ErrorKind::numeric: return "numeric-failure";
    case ErrorKind::no_line: return "no-line";
    case ErrorKind::cut_failure: return "cut-failure";
    case ErrorKind::no_closure: return "no-closure";
    case ErrorKind::not_closed: return "not-closed";
    case ErrorKind::fill_failure: return "fill-failure";
    case ErrorKind::invalid_ground_truth: return "invalid-ground-truth";
    case ErrorKind::empty_result: return "empty-result";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::invalid_argument, what);
}

}  // namespace wtl
