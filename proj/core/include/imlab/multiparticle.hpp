#pragma once

#include <optional>
#include <span>
#include <vector>

#include "imlab/linalg.hpp"
#include "imlab/statistics.hpp"

namespace imlab {

/// N indistinguishable copies of a single-particle space under tau exchange
/// statistics (+1 bosons, -1 fermions).
struct SymmetrySector {
  Statistics tau;
  int particles;
  HilbertSpace single;

  SymmetrySector(Statistics t, int n, HilbertSpace s);
  long long product_dim() const;
};

/// Multi-index <-> flat-index arithmetic on the N-fold product basis.
/// Slot 1 is the most significant digit.
class SlotIndexer {
 public:
  SlotIndexer(int dim, int slots);

  int dim() const { return dim_; }
  int slots() const { return slots_; }
  long long size() const { return size_; }

  void decode(long long flat, std::span<int> digits) const;
  long long encode(std::span<const int> digits) const;

 private:
  int dim_;
  int slots_;
  long long size_;
};

/// Dense N-particle wave function over the product basis, optionally tagged
/// as living in a tau-symmetric sector (the tag is validated).
class MultiState {
 public:
  /// Plain product-space vector, no exchange symmetry asserted.
  static MultiState product(HilbertSpace single, int particles, Vector amplitudes);
  /// Vector asserted (and checked) to be tau-covariant under slot exchange.
  static MultiState symmetric(HilbertSpace single, int particles, Statistics tau,
                              Vector amplitudes);
  /// A single particle is trivially a (symmetric) one-slot state.
  static MultiState from_single(const StateVector& psi, std::optional<Statistics> tau = {});

  const HilbertSpace& single_space() const { return single_; }
  int particles() const { return particles_; }
  std::optional<Statistics> symmetry() const { return symmetry_; }
  const Vector& amplitudes() const { return amps_; }
  long long product_dim() const { return amps_.size(); }

  /// Largest deviation from tau-covariance over all adjacent transpositions.
  double symmetry_defect(Statistics tau) const;

 private:
  MultiState(HilbertSpace single, int particles, std::optional<Statistics> symmetry,
             Vector amplitudes);

  HilbertSpace single_;
  int particles_;
  std::optional<Statistics> symmetry_;
  Vector amps_;
};

/// Operator on the N-fold product space, annotated with the slots it acts on.
struct MultiOperator {
  Matrix matrix;
  HilbertSpace single;
  int particles;
  std::vector<int> slots;  // 1-based
};

/// Amplitudes permuted so that slot s of the result reads slot perm[s-1] of
/// the input: out(i_1..i_N) = in(i_perm(1)..i_perm(N)).
Vector apply_slot_permutation(const Vector& amplitudes, int dim,
                              std::span<const int> perm);

/// Orthogonal projection onto the tau-symmetric sector: the group average
/// (1/N!) sum_sigma tau^sgn(sigma) P_sigma, evaluated orbit by orbit so the
/// output is exactly tau-covariant entry-wise.
Vector symmetrize_vector(const Vector& amplitudes, int dim, int particles, Statistics tau);

/// Dense matrix of the tau-symmetrizer on the N-fold product space.
Matrix symmetrizer_matrix(int dim, int particles, Statistics tau);

struct SymmetrizedProduct {
  MultiState state;   // normalized, tagged symmetric
  double n_exch;      // 1 / (norm of the raw projection)
};

/// Tensor the factors together (slot order = factor order), project onto the
/// tau-symmetric sector and renormalize. Throws ZeroSymmetrization when the
/// projection vanishes (e.g. fermionic double occupation).
SymmetrizedProduct tensor_and_symmetrize(std::span<const MultiState> factors, Statistics tau);
SymmetrizedProduct tensor_and_symmetrize(std::span<const StateVector> factors, Statistics tau);

/// Single-particle operator acting on slot k (1-based) of an N-fold product.
MultiOperator embed_op(const Matrix& single_op, int slot, int particles,
                       const HilbertSpace& single);

/// Additive observable: sum over slots of embed_op. Commutes with the
/// tau-symmetrizer.
MultiOperator additive_embed(const Matrix& single_op, int particles,
                             const HilbertSpace& single);

struct CyclicExpansion {
  MultiState state;      // normalized (N+1)-particle symmetric state
  double normalization;  // the factor that renormalized the cyclic sum
};

/// The (N+1)-term cyclic form of the symmetrized product of a tau-symmetric
/// Psi with one extra particle psi: places psi in slot K with weight
/// tau^(N+1-K) and Psi cyclically on the remaining slots. Agrees with
/// tensor_and_symmetrize up to global phase.
CyclicExpansion cyclic_expansion(const MultiState& Psi, const StateVector& psi);

}  // namespace imlab
