#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imlab/descriptions.hpp"
#include "imlab/linalg.hpp"
#include "imlab/multiparticle.hpp"

namespace imlab {

/// Hermitian generator on the (N+1)-fold product carrier of the
/// tensor-product description (hbar = 1 units).
class Hamiltonian {
 public:
  Hamiltonian(HilbertSpace single, int total_slots, Matrix matrix);

  const HilbertSpace& single_space() const { return single_; }
  int total_slots() const { return total_; }
  const Matrix& matrix() const { return mat_; }

  bool commutes_with_symmetrizer(Statistics tau, double tolerance = tol::commutator) const;
  bool commutes_with_status_projectors(const Matrix& pi_ss,
                                       double tolerance = tol::commutator) const;

 private:
  HilbertSpace single_;
  int total_;
  Matrix mat_;
};

/// Exact propagator exp(-iHt) via one spectral factorization.
class SpectralPropagator {
 public:
  explicit SpectralPropagator(const Matrix& hamiltonian);
  Vector apply(const Vector& state, double t) const;

 private:
  Matrix vectors_;
  Eigen::VectorXd energies_;
};

Vector evolve(const Matrix& hamiltonian, const Vector& state, double t);
StateVector evolve(const Hamiltonian& h, const StateVector& state, double t);

struct CommuteResult {
  bool commute;
  double deviation;  // max-norm of AB - BA
};

CommuteResult commutes(const Matrix& a, const Matrix& b, double tolerance = tol::commutator);

struct CompatibilityRow {
  double t;
  double deviation;        // 1 - |overlap| between the two routes
  bool status_preserved;   // commutator test of H with every embedded pi_ss
  bool degenerate;         // recovery projection vanished at this time
};

struct CompatibilityReport {
  std::vector<CompatibilityRow> rows;
  bool hypothesis_violated = false;  // H fails to commute with the symmetrizer
  bool status_preserved = false;
  double max_deviation = 0.0;

  nlohmann::json to_json() const;
  std::string to_csv() const;  // columns t,deviation,status_preserved
};

/// Evolves the tensor-product state directly and the symmetrized state on
/// its sector, recovers the product description through the registered
/// subspace of `meter`, and tabulates the trajectory deviation per time.
CompatibilityReport compatibility_report(const Hamiltonian& h, const MultiState& Psi,
                                         const StateVector& psi, const Meter& meter,
                                         std::span<const double> times);

}  // namespace imlab
