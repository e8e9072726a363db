#pragma once

#include <stdexcept>
#include <string>

namespace dcsep {

// Base class for all library errors. The CLI maps these onto exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shapes of two operands disagree, or an index request is out of bounds.
struct ShapeError : Error {
  using Error::Error;
};

// A configuration value is malformed or inconsistent.
struct ConfigError : Error {
  using Error::Error;
};

// A hyperparameter combination that cannot describe a network.
struct InvalidConfig : ConfigError {
  using ConfigError::ConfigError;
};

struct InputTooShort : Error {
  using Error::Error;
};

struct EmptyCorpus : Error {
  using Error::Error;
};

struct TooFewPoints : Error {
  using Error::Error;
};

struct UndefinedReference : Error {
  using Error::Error;
};

// Optimization produced a non-finite loss.
struct DivergedError : Error {
  using Error::Error;
};

// A value lies outside its declared search-space range.
struct RangeError : Error {
  using Error::Error;
};

// Linear algebra failed beyond recovery (e.g. Cholesky after max jitter).
struct NumericalError : Error {
  using Error::Error;
};

// No candidate satisfied the parameter budget.
struct FeasibilityError : Error {
  using Error::Error;
};

// File-level problems: missing or malformed artifacts.
struct IoError : Error {
  using Error::Error;
};

}  // namespace dcsep
