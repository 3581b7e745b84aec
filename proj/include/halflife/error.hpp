#pragma once

#include <stdexcept>
#include <string>

namespace halflife {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input is structurally wrong (non-monotone views, off-grid timestamps,
/// bad CSV header). Distinct from a validator rejecting a well-formed input.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A precondition on the numeric content of an argument does not hold.
class DomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace halflife
