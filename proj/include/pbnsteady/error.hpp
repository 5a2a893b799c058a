#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pbn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model contents or an operation that would produce one.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Malformed `.pbn` text. line() is 1-based.
class ParseError : public ModelError {
 public:
  ParseError(std::size_t line, const std::string& message)
      : ModelError("line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// The two-state estimator could not produce an estimate.
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Failure of the exact steady-state solver (size cap, non-convergence).
class ExactError : public Error {
 public:
  using Error::Error;
};

}  // namespace pbn
