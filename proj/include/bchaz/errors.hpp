#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bchaz {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument values or mismatched dimensions.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A parameter point violates the hazard nonnegativity constraint.
class ConstraintError : public Error {
 public:
  using Error::Error;
};

/// Invalid model or sampler configuration (including data that cannot
/// support the requested configuration).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data. `row()` is the 1-based data row (0 when the
/// problem is not tied to a row).
class IngestionError : public Error {
 public:
  IngestionError(const std::string& what, std::size_t row = 0)
      : Error(row == 0 ? what : "row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class InitializationError : public Error {
 public:
  using Error::Error;
};

/// Query outside the time range covered by the partition.
class ExtrapolationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace bchaz
