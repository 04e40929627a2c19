#pragma once

#include <stdexcept>
#include <string>

namespace nesy {

/// Base class for all errors raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data: graphs, weight files, CSV, configuration.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A formula could not be evaluated (unbound variable, INVSUM of zero,
/// probability out of range, missing atom value).
class EvalError : public Error {
 public:
  using Error::Error;
};

/// Model / graph / partition combination rejected while building an
/// inference structure.
class BuildError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during learning or sampling (NaN loss, all-zero
/// conditional).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace nesy
