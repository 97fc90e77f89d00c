#pragma once

#include <stdexcept>
#include <string>

namespace san {

/// Raised when tensor shapes, plane sizes or channel counts do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by the explicit-matrix oracles and the exact norm when a problem is
/// too large to materialize.
class SizeGuardError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Malformed files: .sant containers, checkpoints, experiment configs.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace san
