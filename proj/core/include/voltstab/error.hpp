#pragma once

#include <stdexcept>
#include <string>

namespace voltstab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A structurally invalid input (malformed tree, bad bounds, broken
/// parameter constraints). `subject()` names the offending bus, line or field.
class ValidationError : public Error {
 public:
  ValidationError(std::string subject, const std::string& what)
      : Error(subject + ": " + what), subject_(std::move(subject)) {}

  const std::string& subject() const noexcept { return subject_; }

 private:
  std::string subject_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite arithmetic or a blow-up detected during simulation or training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (JSON, CSV, checkpoints).
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace voltstab
