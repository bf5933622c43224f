#pragma once

#include <stdexcept>
#include <string>

namespace openvox {

// Every failure the library reports derives from Error. The CLI maps the
// concrete type to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a precondition (bad dims, non-rigid pose, unknown key...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// File does not look like what it claims to be (bad magic, bad version).
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Header parsed but the payload disagrees with it.
class CorruptionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A library invariant failed to hold. Always a bug.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace openvox
