#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sepclr {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible for the named operation.
class ShapeError : public Error {
 public:
  ShapeError(const std::string& op, const std::vector<std::size_t>& lhs,
             const std::vector<std::size_t>& rhs);
  ShapeError(const std::string& op, const std::string& detail);
};

/// A precondition on argument values was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A config file or flag could not be parsed or validated.
class ConfigError : public Error {
 public:
  using Error::Error;
};

std::string format_shape(const std::vector<std::size_t>& shape);

}  // namespace sepclr
