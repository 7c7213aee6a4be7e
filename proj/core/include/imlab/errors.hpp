#pragma once

#include <stdexcept>
#include <string>

namespace imlab {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands live on spaces of different dimension.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A construction-time invariant failed (non-Hermitian matrix, bad norm,
/// non-projector, negative density operator, ...).
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// The symmetrized projection of a product vanished (e.g. a fermionic
/// doubly-occupied configuration).
class ZeroSymmetrization : public Error {
 public:
  using Error::Error;
};

/// A creation operator pushed amplitude past the occupation cutoff.
class CutoffExceeded : public Error {
 public:
  using Error::Error;
};

/// Recovery of the tensor-product description degenerated: the projected
/// vector had (numerically) zero norm, i.e. the separation hypothesis failed.
class RecoveryDegenerate : public Error {
 public:
  using Error::Error;
};

/// A scenario preparation failed the separation-status gate.
class PreparationViolation : public Error {
 public:
  using Error::Error;
};

/// A scenario configuration is malformed or out of range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace imlab
