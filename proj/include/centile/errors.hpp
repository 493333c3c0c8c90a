#pragma once

#include <stdexcept>
#include <string>

namespace centile {

/// Base class for every error raised by the library.  The CLI maps these to
/// exit code 1 (validation error).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain an operation is defined on
/// (age outside the knot range, tau outside (0,1), ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input data or parameters violate a precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The design matrix does not have full column rank.
class RankDeficientError : public Error {
 public:
  using Error::Error;
};

/// A model file is malformed.  The message names the offending field path.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A model file holds a different model kind than the one requested.
class ModelTypeError : public Error {
 public:
  using Error::Error;
};

}  // namespace centile
