#pragma once

#include <stdexcept>
#include <string>

namespace worldgan {

// Malformed input text (JSON/CSV). Messages name the offending line or field.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failures: unreadable, unwritable, missing.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure during training (non-finite loss and the like).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace worldgan
