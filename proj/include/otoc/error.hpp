#pragma once

#include <stdexcept>
#include <string>

namespace otoc {

/// Input violates a documented precondition or invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file does not follow the expected binary layout (bad magic or version).
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Reading or writing a file failed, or the payload was truncated.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace otoc
