#pragma once

#include <stdexcept>
#include <string>

namespace momsos {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands live in polynomial rings with different numbers of variables.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A degree bound was exceeded (e.g. Riesz functional of a polynomial of
/// degree larger than the truncation, or a relaxation order below d0).
class DegreeError : public Error {
 public:
  using Error::Error;
};

/// A combinatorial count does not fit in the index type.
class SizeLimitError : public Error {
 public:
  using Error::Error;
};

/// Malformed model data (duplicate names, inconsistent tuples, ...).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Malformed SDPA interchange file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace momsos
