#pragma once

namespace imlab::tol {

// Construction-time invariants.
inline constexpr double hermitian = 1e-12;
inline constexpr double unit_norm = 1e-12;
inline constexpr double unit_trace = 1e-12;
inline constexpr double psd_min_eigenvalue = -1e-10;

// Structural identities (projectors, resolutions of identity, reconstruction).
inline constexpr double projector = 1e-10;
inline constexpr double effect_spectrum = 1e-10;

// Probability clamping: values this close to [0,1] are rounded into it.
inline constexpr double probability_clamp = 1e-10;
// Expectation values: imaginary residue above this signals corruption.
inline constexpr double imaginary_residue = 1e-8;

// Symmetrized projections with pre-normalization norm below this are
// treated as exact zeros (Pauli exclusion) rather than roundoff.
inline constexpr double zero_symmetrization = 1e-12;

// Separation-status contraction residual.
inline constexpr double separation = 1e-10;

// Meter domain classification.
inline constexpr double domain = 1e-10;

// Commutator deviation below which two operators count as commuting.
inline constexpr double commutator = 1e-10;

// Trajectory deviation bound for compatible dynamics.
inline constexpr double dynamics = 1e-8;

// Outcome probabilities below this are unreachable by the sampler; keeps
// null-set states at exactly zero registered frequency.
inline constexpr double sampler_floor = 1e-12;

}  // namespace imlab::tol
