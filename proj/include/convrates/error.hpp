// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace convrates {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition was violated. `invariant()` names it.
class PreconditionError : public Error {
 public:
  PreconditionError(std::string invariant, const std::string& message)
      : Error(invariant + ": " + message), invariant_(std::move(invariant)) {}

  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

/// Tensor shapes do not fit together.
class ShapeError : public PreconditionError {
 public:
  explicit ShapeError(const std::string& message)
      : PreconditionError("shape", message) {}
};

/// A sampled property check (inequality, cover, bound) failed.
class PropertyFailure : public Error {
 public:
  using Error::Error;
};

/// Malformed structured text input, with the offending line and field.
class ParseError : public Error {
 public:
  ParseError(std::string field, int line, const std::string& message)
      : Error("line " + std::to_string(line) + ", field '" + field + "': " + message),
        field_(std::move(field)),
        line_(line) {}

  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  std::string field_;
  int line_;
};

/// Optimisation produced a non-finite loss. `trace()` holds the empirical
/// risks recorded before the failure.
class TrainingFailure : public Error {
 public:
  explicit TrainingFailure(const std::string& message, std::vector<double> trace = {})
      : Error(message), trace_(std::move(trace)) {}

  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

inline void require(bool condition, const char* invariant, const std::string& message) {
  if (!condition) throw PreconditionError(invariant, message);
}

}  // namespace convrates
