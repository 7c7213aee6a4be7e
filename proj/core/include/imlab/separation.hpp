#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imlab/linalg.hpp"
#include "imlab/multiparticle.hpp"

namespace imlab {

/// The subsystem of one environment object holding all particles
/// indistinguishable from the prepared system: a density operator on the
/// N-fold product space, supported on the tau-symmetric sector.
class EnvironmentObject {
 public:
  EnvironmentObject(std::string label, SymmetrySector sector, Matrix state);

  /// Symmetrized pure product |chi_1 ... chi_N><...| as a density operator.
  static EnvironmentObject pure_product(std::string label, Statistics tau,
                                        std::span<const StateVector> factors);
  static EnvironmentObject from_multistate(std::string label, const MultiState& m);

  const std::string& label() const { return label_; }
  const SymmetrySector& sector() const { return sector_; }
  const Matrix& state() const { return state_; }

 private:
  std::string label_;
  SymmetrySector sector_;
  Matrix state_;
};

struct Environment {
  std::vector<EnvironmentObject> objects;
};

/// Euclidean norm of the kernel contraction of the environment state with
/// psi in the first primed slot; zero means the object cannot leak into psi.
/// Invariant under simultaneous single-particle unitaries.
double contraction_residual(const EnvironmentObject& object, const StateVector& psi);
/// Same contraction through primed slot `slot` (1-based); equal norms for
/// every slot by tau-symmetry of the environment state.
double contraction_residual(const EnvironmentObject& object, const StateVector& psi,
                            int slot);

struct SeparationReport {
  struct Entry {
    std::string label;
    double residual;
    bool separated;
  };
  std::vector<Entry> entries;
  double tolerance = tol::separation;
  bool separated = true;
  std::string prepared_kind = "pure";

  nlohmann::json to_json() const;
};

/// Definition-style test: psi is separated iff every object's contraction
/// residual stays below tol.
SeparationReport has_separation_status(const StateVector& psi, const Environment& env,
                                       double tolerance = tol::separation);

/// Extension to mixed prepared states (artifact-chosen): per object, the
/// weighted rms of eigenvector residuals sqrt(sum_i p_i r_i^2).
SeparationReport has_separation_status(const DensityOperator& prepared,
                                       const Environment& env,
                                       double tolerance = tol::separation);

struct OverlapDecomposition {
  Complex c1;                           // <psi|phi>
  double c2;                            // norm of the orthogonal remainder
  std::optional<StateVector> psi_perp;  // unset when phi is parallel to psi
};

/// phi = c1 psi + c2 psi_perp with psi_perp normalized and orthogonal to psi.
OverlapDecomposition overlap_decompose(const StateVector& phi, const StateVector& psi);

}  // namespace imlab
