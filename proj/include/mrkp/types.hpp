#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace mrkp {

/// Row-major N×3 coordinate block; one point per row.
template <typename Scalar>
using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class ErrorKind {
  kParse,
  kDegenerateInput,
  kArgument,
  kNumeric,
  kIncompatible,
  kUndefinedMetric,
  kIo,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kDegenerateInput: return "degenerate input";
    case ErrorKind::kArgument: return "argument error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kIncompatible: return "incompatible artifact";
    case ErrorKind::kUndefinedMetric: return "undefined metric";
    case ErrorKind::kIo: return "i/o error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error(ErrorKind::kParse, message + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace mrkp
