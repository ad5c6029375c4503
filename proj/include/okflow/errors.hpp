#pragma once

#include <stdexcept>
#include <string>

namespace okflow {

/// A mesh with an odd cell count per axis cannot be coarsened.
struct CannotCoarsen : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown: non-SPD matrix handed to an SPD routine,
/// eigensolver iteration cap exceeded, and similar.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid run configuration (file contents or derived solver settings).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A state violates a required identity, e.g. a Neumann Poisson
/// right-hand side that is not mean-zero.
struct InconsistentState : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace okflow
