#pragma once

#include <stdexcept>
#include <string>

namespace mdeeg {

// Precondition violations on domain values (bad band edges, too-short input,
// shape mismatches) throw std::invalid_argument / std::domain_error directly.
// The types below carry the CLI exit-code classes.

/// Malformed or inconsistent input data (files, labels, single-class folds).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad command-line or configuration usage.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values reached a place where they cannot be recovered from.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mdeeg
