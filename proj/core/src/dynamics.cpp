#include "imlab/dynamics.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "imlab/report_io.hpp"

namespace imlab {

Hamiltonian::Hamiltonian(HilbertSpace single, int total_slots, Matrix matrix)
    : single_(std::move(single)), total_(total_slots), mat_(std::move(matrix)) {
  if (total_ < 1) throw InvariantViolation("Hamiltonian needs >= 1 slot");
  const SlotIndexer idx(single_.dim(), total_);
  if (mat_.rows() != idx.size() || mat_.cols() != idx.size())
    throw DimensionMismatch("Hamiltonian shape != dim^slots");
  if (!is_hermitian(mat_, tol::hermitian))
    throw InvariantViolation("Hamiltonian must be Hermitian");
}

bool Hamiltonian::commutes_with_symmetrizer(Statistics tau, double tolerance) const {
  const Matrix sym = symmetrizer_matrix(single_.dim(), total_, tau);
  return commutes(mat_, sym, tolerance).commute;
}

bool Hamiltonian::commutes_with_status_projectors(const Matrix& pi_ss,
                                                  double tolerance) const {
  for (int k = 1; k <= total_; ++k) {
    const MultiOperator embedded = embed_op(pi_ss, k, total_, single_);
    if (!commutes(mat_, embedded.matrix, tolerance).commute) return false;
  }
  return true;
}

SpectralPropagator::SpectralPropagator(const Matrix& hamiltonian) {
  if (!is_hermitian(hamiltonian, tol::hermitian))
    throw InvariantViolation("SpectralPropagator: generator must be Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hamiltonian);
  if (solver.info() != Eigen::Success)
    throw Error("SpectralPropagator: eigensolver failed");
  vectors_ = solver.eigenvectors();
  energies_ = solver.eigenvalues();
}

Vector SpectralPropagator::apply(const Vector& state, double t) const {
  if (state.size() != vectors_.rows())
    throw DimensionMismatch("SpectralPropagator: state dimension mismatch");
  Vector coeffs = vectors_.adjoint() * state;
  for (Eigen::Index i = 0; i < coeffs.size(); ++i)
    coeffs(i) *= std::exp(Complex(0.0, -energies_(i) * t));
  return vectors_ * coeffs;
}

Vector evolve(const Matrix& hamiltonian, const Vector& state, double t) {
  return SpectralPropagator(hamiltonian).apply(state, t);
}

StateVector evolve(const Hamiltonian& h, const StateVector& state, double t) {
  if (state.dim() != h.matrix().rows())
    throw DimensionMismatch("evolve: state dimension mismatch");
  return StateVector(state.space(), evolve(h.matrix(), state.amplitudes(), t));
}

CommuteResult commutes(const Matrix& a, const Matrix& b, double tolerance) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("commutes: shape mismatch");
  const double dev = max_abs(Matrix(a * b - b * a));
  return CommuteResult{dev < tolerance, dev};
}

nlohmann::json CompatibilityReport::to_json() const {
  nlohmann::json j;
  j["hypothesis_violated"] = hypothesis_violated;
  j["status_preserved"] = status_preserved;
  j["max_deviation"] = max_deviation;
  j["rows"] = nlohmann::json::array();
  for (const CompatibilityRow& r : rows) {
    nlohmann::json row;
    row["t"] = r.t;
    row["deviation"] = r.deviation;
    row["status_preserved"] = r.status_preserved;
    row["degenerate"] = r.degenerate;
    j["rows"].push_back(row);
  }
  return j;
}

std::string CompatibilityReport::to_csv() const {
  std::ostringstream os;
  os << "t,deviation,status_preserved\n";
  for (const CompatibilityRow& r : rows)
    os << format_double(r.t) << "," << format_double(r.deviation) << ","
       << (r.status_preserved ? 1 : 0) << "\n";
  return os.str();
}

CompatibilityReport compatibility_report(const Hamiltonian& h, const MultiState& Psi,
                                         const StateVector& psi, const Meter& meter,
                                         std::span<const double> times) {
  if (!Psi.symmetry())
    throw InvariantViolation("compatibility_report: Psi must be tagged symmetric");
  const Statistics tau = *Psi.symmetry();
  const int d = psi.dim();
  const int total = Psi.particles() + 1;
  if (h.total_slots() != total)
    throw DimensionMismatch("compatibility_report: Hamiltonian slot count mismatch");

  CompatibilityReport report;
  report.hypothesis_violated = !h.commutes_with_symmetrizer(tau);
  report.status_preserved = h.commutes_with_status_projectors(meter.pi_ss());

  const FirstWayState fw0 = first_way(Psi, psi);
  const SecondWayState sw0 = second_way(Psi, psi);
  const SpectralPropagator propagator(h.matrix());

  for (double t : times) {
    const Vector fw_t = propagator.apply(fw0.joint, t);
    const Vector sw_t = propagator.apply(sw0.state.amplitudes(), t);
    Vector recovered = project_last_slot(sw_t, d, total, meter.pi_ss());
    const double norm = recovered.norm();
    CompatibilityRow row{t, 1.0, report.status_preserved, false};
    if (norm < tol::zero_symmetrization) {
      row.degenerate = true;  // registered component died out: status lost
    } else {
      recovered /= norm;
      row.deviation = 1.0 - std::abs(recovered.dot(fw_t));
      if (row.deviation < 0.0) row.deviation = 0.0;
    }
    report.max_deviation = std::max(report.max_deviation, row.deviation);
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace imlab
