#pragma once

#include <stdexcept>
#include <string>

namespace gazeauth {

// Bad input: malformed files, violated preconditions, inconsistent shapes.
// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failures that are not the caller's fault: I/O, singular systems, numeric
// breakdown. The CLI maps this to exit code 3.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

class NumericError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

}  // namespace gazeauth
