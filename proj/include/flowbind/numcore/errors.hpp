#pragma once

#include <stdexcept>
#include <string>

namespace flowbind {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or widths.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced by an operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the autograd graph (non-scalar loss, double backward).
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument outside the shape/numeric categories.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace flowbind
