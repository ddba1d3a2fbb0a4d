#pragma once

#include <stdexcept>
#include <string>

namespace voltlab {

// Malformed input text (grid, config, or time-series documents).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed input that violates a model invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system failures: missing files, unwritable output directories.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace voltlab
