#include "imlab/separation.hpp"

#include <cmath>
#include <utility>

namespace imlab {

EnvironmentObject::EnvironmentObject(std::string label, SymmetrySector sector, Matrix state)
    : label_(std::move(label)), sector_(std::move(sector)), state_(std::move(state)) {
  const long long size = sector_.product_dim();
  if (state_.rows() != size || state_.cols() != size)
    throw DimensionMismatch("EnvironmentObject: state shape != sector dimension");
  // Density invariants.
  const DensityOperator check(HilbertSpace(static_cast<int>(size)), state_);
  (void)check;
  // tau-symmetric support: projecting onto the sector must not change it.
  const Matrix sym = symmetrizer_matrix(sector_.single.dim(), sector_.particles, sector_.tau);
  if (max_abs(Matrix(state_ - sym * state_ * sym)) > tol::projector)
    throw InvariantViolation("EnvironmentObject: state not supported on the symmetric sector");
}

EnvironmentObject EnvironmentObject::pure_product(std::string label, Statistics tau,
                                                  std::span<const StateVector> factors) {
  SymmetrizedProduct sp = tensor_and_symmetrize(factors, tau);
  return from_multistate(std::move(label), sp.state);
}

EnvironmentObject EnvironmentObject::from_multistate(std::string label, const MultiState& m) {
  if (!m.symmetry())
    throw InvariantViolation("EnvironmentObject: state must be tagged symmetric");
  SymmetrySector sector(*m.symmetry(), m.particles(), m.single_space());
  Matrix density = m.amplitudes() * m.amplitudes().adjoint();
  return EnvironmentObject(std::move(label), std::move(sector), std::move(density));
}

double contraction_residual(const EnvironmentObject& object, const StateVector& psi) {
  return contraction_residual(object, psi, 1);
}

double contraction_residual(const EnvironmentObject& object, const StateVector& psi,
                            int slot) {
  const int d = object.sector().single.dim();
  const int n = object.sector().particles;
  if (psi.dim() != d)
    throw DimensionMismatch("contraction_residual: psi dimension != environment mode space");
  if (slot < 1 || slot > n) throw InvariantViolation("contraction_residual: bad slot");

  const SlotIndexer idx(d, n);
  const long long rows = idx.size();
  double sum_sq = 0.0;
  std::vector<int> digits(static_cast<size_t>(n));
  // For each unprimed row and each assignment of the remaining primed slots,
  // contract the chosen primed slot against psi. The residual is the
  // Euclidean norm of the contracted tensor: invariant under single-particle
  // unitaries, zero exactly when the contraction vanishes.
  const long long rest_count = rows / d;
  for (long long row = 0; row < rows; ++row) {
    for (long long rest = 0; rest < rest_count; ++rest) {
      // Decode `rest` into the primed digits, skipping `slot`.
      long long r = rest;
      for (int s = n - 1; s >= 0; --s) {
        if (s == slot - 1) continue;
        digits[static_cast<size_t>(s)] = static_cast<int>(r % d);
        r /= d;
      }
      Complex acc = 0.0;
      for (int x = 0; x < d; ++x) {
        digits[static_cast<size_t>(slot - 1)] = x;
        acc += object.state()(row, idx.encode(digits)) * psi.amplitudes()(x);
      }
      sum_sq += std::norm(acc);
    }
  }
  return std::sqrt(sum_sq);
}

nlohmann::json SeparationReport::to_json() const {
  nlohmann::json j;
  j["tolerance"] = tolerance;
  j["separated"] = separated;
  j["prepared_kind"] = prepared_kind;
  j["objects"] = nlohmann::json::array();
  for (const Entry& e : entries) {
    nlohmann::json row;
    row["label"] = e.label;
    row["residual"] = e.residual;
    row["verdict"] = e.separated ? "separated" : "overlapping";
    j["objects"].push_back(row);
  }
  return j;
}

SeparationReport has_separation_status(const StateVector& psi, const Environment& env,
                                       double tolerance) {
  if (tolerance <= 0) throw InvariantViolation("separation tolerance must be positive");
  SeparationReport report;
  report.tolerance = tolerance;
  for (const EnvironmentObject& object : env.objects) {
    const double r = contraction_residual(object, psi);
    const bool ok = r < tolerance;
    report.entries.push_back({object.label(), r, ok});
    report.separated = report.separated && ok;
  }
  return report;
}

SeparationReport has_separation_status(const DensityOperator& prepared,
                                       const Environment& env, double tolerance) {
  if (tolerance <= 0) throw InvariantViolation("separation tolerance must be positive");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(prepared.matrix());
  SeparationReport report;
  report.tolerance = tolerance;
  report.prepared_kind = "mixed_extension";
  for (const EnvironmentObject& object : env.objects) {
    double weighted_sq = 0.0;
    for (int i = 0; i < solver.eigenvalues().size(); ++i) {
      const double p = solver.eigenvalues()(i);
      if (p <= tol::sampler_floor) continue;
      const StateVector eigvec =
          StateVector::normalized(prepared.space(), solver.eigenvectors().col(i));
      const double r = contraction_residual(object, eigvec);
      weighted_sq += p * r * r;
    }
    const double r = std::sqrt(weighted_sq);
    const bool ok = r < tolerance;
    report.entries.push_back({object.label(), r, ok});
    report.separated = report.separated && ok;
  }
  return report;
}

OverlapDecomposition overlap_decompose(const StateVector& phi, const StateVector& psi) {
  if (phi.dim() != psi.dim()) throw DimensionMismatch("overlap_decompose: dimension mismatch");
  const Complex c1 = inner(psi, phi);
  const Vector remainder = phi.amplitudes() - c1 * psi.amplitudes();
  const double c2 = remainder.norm();
  OverlapDecomposition out{c1, c2, std::nullopt};
  if (c2 > tol::unit_norm)
    out.psi_perp = StateVector::normalized(psi.space(), remainder);
  return out;
}

}  // namespace imlab
