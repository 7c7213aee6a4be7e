#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imlab/meter.hpp"
#include "imlab/multiparticle.hpp"
#include "imlab/separation.hpp"

namespace imlab {

/// Tensor-product description: environment wave function times system wave
/// function, no symmetrization across the boundary.
struct FirstWayState {
  MultiState env;
  StateVector sys;
  Vector joint;  // kron(env, sys) on the (N+1)-fold product space
};

/// Fully symmetrized description on the (N+1)-particle sector, with the
/// provenance that produced it.
struct SecondWayState {
  MultiState state;
  MultiState env;
  StateVector sys;
  double n_exch;
};

FirstWayState first_way(const MultiState& Psi, const StateVector& psi);
SecondWayState second_way(const MultiState& Psi, const StateVector& psi);

struct Recovery {
  FirstWayState state;
  double nu_psi;    // factor that renormalized the projected vector
  bool separated;   // slot-contraction check of psi against Psi
};

/// Projects the system slot of the symmetrized state onto psi and
/// renormalizes; under separation status this recovers the tensor-product
/// description up to global phase. Throws RecoveryDegenerate when the
/// projection vanishes.
Recovery recover_first(const SecondWayState& sw, const StateVector& psi);
/// Same through slot `slot` (1-based); the result is relabelled back to the
/// system-last convention, exhibiting exchange covariance.
Recovery recover_first_slot(const SecondWayState& sw, const StateVector& psi, int slot);

/// Generalized recovery: project slot N+1 onto an arbitrary subspace
/// projector (used by the dynamics compatibility check with pi_ss).
Vector project_last_slot(const Vector& joint, int dim, int total_slots,
                         const Matrix& projector);

/// Second-way outcome operator for eigenvalue cluster k: the sum over slots
/// of embedded Pi_k Pi_ss. A projection on the working sector, not in
/// general.
MultiOperator secondway_projector(int k, const Meter& meter, int env_particles);

struct BornEquivalenceRow {
  double eigenvalue;
  double first_prob;
  double second_prob;
  double deviation;
};

struct BornEquivalenceReport {
  std::vector<BornEquivalenceRow> rows;
  double max_deviation = 0.0;
  bool hypothesis_violated = false;
  std::vector<std::string> violations;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Per-eigenvalue comparison of the two Born rules. Preconditions (psi in
/// H_ss, separation from Psi, environment orthogonal to H_ss) are measured,
/// not enforced: violated runs are stamped, since the discrepancy itself is
/// the interesting output.
BornEquivalenceReport born_equivalence_report(const MultiState& Psi,
                                              const StateVector& psi, const Meter& meter);

}  // namespace imlab
