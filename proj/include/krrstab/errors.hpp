#pragma once

#include <stdexcept>
#include <string>

namespace krrstab {

/// Invalid input to a library call (shape mismatch, out-of-range parameter).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An interpolation or vanishing constraint has no solution for the given right side.
class InconsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical sanity check failed (indefinite Gram, failed factorization, degenerate fit).
class DiagnosticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace krrstab
