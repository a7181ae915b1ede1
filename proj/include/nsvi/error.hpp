#pragma once

#include <stdexcept>
#include <string>

namespace nsvi {

// Error hierarchy. The CLI maps each branch to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (files, documents, shapes).
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid argument combinations supplied by a caller or user.
class UsageError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Argument outside a function's mathematical domain.
class DomainError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Near-singular system encountered by a linear solve.
class ConditioningError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace nsvi
