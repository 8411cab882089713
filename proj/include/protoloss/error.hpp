#pragma once

#include <stdexcept>
#include <string>

namespace protoloss {

// Base of every error the library throws. The CLI maps subclasses onto
// stable exit codes (see exit_code_for).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid sizes, hyperparameters or config fields.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition (shape mismatch, bad label...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Malformed input file. The message names the offending line.
class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf during training or a prototype that collapsed to the origin.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DegeneratePrototypeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace protoloss
