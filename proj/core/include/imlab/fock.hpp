#pragma once

#include <span>
#include <vector>

#include "imlab/linalg.hpp"
#include "imlab/multiparticle.hpp"
#include "imlab/statistics.hpp"

namespace imlab {

/// Occupation-number basis over d modes, truncated at total occupation
/// n_max. Fermion occupations are 0/1; their cutoff defaults to d.
class FockSpace {
 public:
  FockSpace(int modes, Statistics eta, int n_max);

  int modes() const { return modes_; }
  Statistics eta() const { return eta_; }
  int n_max() const { return n_max_; }
  int dim() const { return static_cast<int>(basis_.size()); }

  const std::vector<int>& occupation(int index) const;
  int total_occupation(int index) const;
  /// Basis index of an occupation tuple, or -1 if outside the cutoff space.
  int index_of(std::span<const int> occupation) const;

  /// View of this space as a plain labelled Hilbert space (labels carry the
  /// occupation tuples), so linalg-level operations apply to Fock data.
  HilbertSpace as_hilbert_space() const;

  bool operator==(const FockSpace& o) const {
    return modes_ == o.modes_ && eta_ == o.eta_ && n_max_ == o.n_max_;
  }

 private:
  int modes_;
  Statistics eta_;
  int n_max_;
  std::vector<std::vector<int>> basis_;
  std::vector<long long> keys_;  // sorted mixed-radix keys, parallel lookup
  std::vector<int> key_order_;
};

enum class LadderKind { create, annihilate };

/// Mode ladder operator materialized on the cutoff basis. Matrix elements
/// follow sqrt(n) bosonic factors; the fermionic sign convention is the
/// ordered product (-1)^(number occupied below the mode).
struct LadderOperator {
  int mode;  // 0-based
  LadderKind kind;
  Matrix matrix;
};

LadderOperator ladder(const FockSpace& space, int mode, LadderKind kind);

/// State on the occupation basis. Raw (unnormalized) states arise as ladder
/// images and are flagged; every other constructor asserts unit norm.
class FockState {
 public:
  FockState(FockSpace space, Vector amplitudes);
  static FockState raw(FockSpace space, Vector amplitudes);
  static FockState vacuum(FockSpace space);
  static FockState basis(FockSpace space, std::span<const int> occupation);

  const FockSpace& space() const { return space_; }
  const Vector& amplitudes() const { return amps_; }
  bool is_normalized() const { return normalized_; }
  double norm() const { return amps_.norm(); }
  FockState normalized_copy() const;

 private:
  FockSpace space_;
  Vector amps_;
  bool normalized_;
};

/// Applies the ladder matrix; a creation that would push amplitude past the
/// occupation cutoff raises CutoffExceeded (a fermionic Pauli zero does not).
FockState apply_ladder(const LadderOperator& op, const FockState& s);

/// Occupation-diagonal observable sum_n o_n a^dag_n a_n.
HermitianObservable additive_fock_observable(const FockSpace& space,
                                             std::span<const double> mode_values);

/// <s|O|s> for a normalized Fock state.
double fock_expectation(const FockState& s, const HermitianObservable& O);

struct CcrDeviation {
  double restricted;  // columns with total occupation <= n_max - 1
  double full;        // all columns, including the truncated top shell
};

/// Max-norm deviation of a_r a^dag_s - eta a^dag_s a_r - delta_rs from zero.
CcrDeviation check_ccr(const FockSpace& space, int r, int s);

/// Unitary map between the tau-symmetric N-particle sector and the total
/// occupation-N sector of the matching Fock space (eta = tau).
FockState occupation_isomorphism(const MultiState& m);
FockState occupation_isomorphism(const MultiState& m, const FockSpace& target);
MultiState multistate_from_fock(const FockState& s);

}  // namespace imlab
