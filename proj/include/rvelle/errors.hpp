#pragma once

#include <stdexcept>
#include <string>

namespace rvelle {

/// Invalid mesh, material, solver or CLI configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear solve failed, staggered scheme did not converge, or too many
/// samples were dropped during generation.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure outside the FE solvers (singular weights, eigensolver).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// On-disk data that cannot be trusted.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Stored data is well formed but violates a model invariant
/// (e.g. W row sparsity disagreeing with k1).
class InvariantError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace rvelle
