#include "imlab/descriptions.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

#include "imlab/report_io.hpp"

namespace imlab {

namespace {

void require_symmetric(const MultiState& Psi, const char* who) {
  if (!Psi.symmetry())
    throw InvariantViolation(std::string(who) + ": Psi must be tagged tau-symmetric");
}

// Residual of the slot-k contraction <psi|_k Psi; zero for every k iff psi
// is orthogonal to each single-particle component of Psi.
double slot_contraction_residual(const MultiState& Psi, const StateVector& psi, int slot) {
  const int d = Psi.single_space().dim();
  const int n = Psi.particles();
  const SlotIndexer idx(d, n);
  std::vector<int> digits(static_cast<size_t>(n));
  double residual = 0.0;
  const long long rest_count = idx.size() / d;
  for (long long rest = 0; rest < rest_count; ++rest) {
    long long r = rest;
    for (int s = n - 1; s >= 0; --s) {
      if (s == slot - 1) continue;
      digits[static_cast<size_t>(s)] = static_cast<int>(r % d);
      r /= d;
    }
    Complex acc = 0.0;
    for (int x = 0; x < d; ++x) {
      digits[static_cast<size_t>(slot - 1)] = x;
      acc += std::conj(psi.amplitudes()(x)) * Psi.amplitudes()(idx.encode(digits));
    }
    residual = std::max(residual, std::abs(acc));
  }
  return residual;
}

double max_slot_contraction_residual(const MultiState& Psi, const StateVector& psi) {
  double r = 0.0;
  for (int k = 1; k <= Psi.particles(); ++k)
    r = std::max(r, slot_contraction_residual(Psi, psi, k));
  return r;
}

}  // namespace

FirstWayState first_way(const MultiState& Psi, const StateVector& psi) {
  require_symmetric(Psi, "first_way");
  if (!(Psi.single_space() == psi.space()))
    throw DimensionMismatch("first_way: Psi and psi on different single spaces");
  Vector joint = kron(Psi.amplitudes(), psi.amplitudes());
  return FirstWayState{Psi, psi, std::move(joint)};
}

SecondWayState second_way(const MultiState& Psi, const StateVector& psi) {
  require_symmetric(Psi, "second_way");
  const Statistics tau = *Psi.symmetry();
  const MultiState lifted = MultiState::from_single(psi);
  const MultiState factors[] = {Psi, lifted};
  SymmetrizedProduct sp = tensor_and_symmetrize(std::span<const MultiState>(factors), tau);
  return SecondWayState{std::move(sp.state), Psi, psi, sp.n_exch};
}

Vector project_last_slot(const Vector& joint, int dim, int total_slots,
                         const Matrix& projector) {
  const SlotIndexer idx(dim, total_slots);
  if (joint.size() != idx.size())
    throw DimensionMismatch("project_last_slot: vector length != dim^slots");
  if (projector.rows() != dim || projector.cols() != dim)
    throw DimensionMismatch("project_last_slot: projector is not single-particle");
  Vector out(joint.size());
  const long long blocks = joint.size() / dim;
  for (long long b = 0; b < blocks; ++b)
    out.segment(b * dim, dim) = projector * joint.segment(b * dim, dim);
  return out;
}

namespace {

Recovery recover_common(const SecondWayState& sw, const StateVector& psi,
                        const Vector& projected_joint, bool separated) {
  const int d = sw.state.single_space().dim();
  const int total = sw.state.particles();
  const double norm = projected_joint.norm();
  if (norm < tol::zero_symmetrization)
    throw RecoveryDegenerate("recover_first: projected vector vanished");

  // The projected vector is exactly (env part) x psi; contract out psi.
  const long long env_size = projected_joint.size() / d;
  Vector env_raw(env_size);
  for (long long b = 0; b < env_size; ++b)
    env_raw(b) = psi.amplitudes().dot(projected_joint.segment(b * d, d));
  const double env_norm = env_raw.norm();
  if (env_norm < tol::zero_symmetrization)
    throw RecoveryDegenerate("recover_first: recovered environment part vanished");
  env_raw /= env_norm;

  MultiState env = (total - 1 == 1)
                       ? MultiState::from_single(
                             StateVector(sw.state.single_space(), env_raw),
                             sw.state.symmetry())
                       : MultiState::symmetric(sw.state.single_space(), total - 1,
                                               *sw.state.symmetry(), std::move(env_raw));
  FirstWayState fw = first_way(env, psi);
  return Recovery{std::move(fw), 1.0 / norm, separated};
}

}  // namespace

Recovery recover_first(const SecondWayState& sw, const StateVector& psi) {
  const int d = sw.state.single_space().dim();
  const int total = sw.state.particles();
  if (psi.dim() != d) throw DimensionMismatch("recover_first: psi dimension mismatch");
  const bool separated =
      max_slot_contraction_residual(sw.env, psi) < tol::separation;
  const Matrix pi_psi = psi.amplitudes() * psi.amplitudes().adjoint();
  Vector projected = project_last_slot(sw.state.amplitudes(), d, total, pi_psi);
  return recover_common(sw, psi, projected, separated);
}

Recovery recover_first_slot(const SecondWayState& sw, const StateVector& psi, int slot) {
  const int d = sw.state.single_space().dim();
  const int total = sw.state.particles();
  if (slot < 1 || slot > total) throw InvariantViolation("recover_first_slot: bad slot");
  if (slot == total) return recover_first(sw, psi);

  // Cycle the chosen slot to the last position, then recover as usual. The
  // relabelling permutation sends (1..slot-1, slot+1..total, slot) into
  // slot order, matching the renamed-argument form of the product.
  std::vector<int> perm;
  perm.reserve(static_cast<size_t>(total));
  for (int s = 1; s <= total; ++s)
    if (s != slot) perm.push_back(s);
  perm.push_back(slot);
  Vector cycled = apply_slot_permutation(sw.state.amplitudes(), d, perm);

  const bool separated =
      max_slot_contraction_residual(sw.env, psi) < tol::separation;
  const Matrix pi_psi = psi.amplitudes() * psi.amplitudes().adjoint();
  Vector projected = project_last_slot(cycled, d, total, pi_psi);
  return recover_common(sw, psi, projected, separated);
}

MultiOperator secondway_projector(int k, const Meter& meter, int env_particles) {
  if (env_particles < 0)
    throw InvariantViolation("secondway_projector: negative environment count");
  const SpectralDecomposition& decomp = meter.measure().decomposition();
  if (k < 0 || k >= decomp.size())
    throw InvariantViolation("secondway_projector: eigenvalue index out of range");
  const Matrix truncated = decomp.projector(k) * meter.pi_ss();
  const HilbertSpace& single = meter.observable().space();
  if (env_particles == 0)
    return MultiOperator{truncated, single, 1, {1}};
  return additive_embed(truncated, env_particles + 1, single);
}

nlohmann::json BornEquivalenceReport::to_json() const {
  nlohmann::json j;
  j["max_deviation"] = max_deviation;
  j["hypothesis_violated"] = hypothesis_violated;
  j["violations"] = violations;
  j["rows"] = nlohmann::json::array();
  for (const BornEquivalenceRow& r : rows) {
    nlohmann::json row;
    row["eigenvalue"] = r.eigenvalue;
    row["first_way"] = r.first_prob;
    row["second_way"] = r.second_prob;
    row["deviation"] = r.deviation;
    j["rows"].push_back(row);
  }
  return j;
}

std::string BornEquivalenceReport::to_csv() const {
  std::ostringstream os;
  os << "eigenvalue,first_way,second_way,deviation\n";
  for (const BornEquivalenceRow& r : rows)
    os << format_double(r.eigenvalue) << "," << format_double(r.first_prob) << ","
       << format_double(r.second_prob) << "," << format_double(r.deviation) << "\n";
  return os.str();
}

BornEquivalenceReport born_equivalence_report(const MultiState& Psi,
                                              const StateVector& psi, const Meter& meter) {
  require_symmetric(Psi, "born_equivalence_report");
  const int d = psi.dim();
  if (meter.observable().dim() != d)
    throw DimensionMismatch("born_equivalence_report: meter dimension mismatch");
  const int n = Psi.particles();

  BornEquivalenceReport report;

  // Measured preconditions.
  const Matrix one_minus = Matrix::Identity(d, d) - meter.pi_ss();
  if (Vector(one_minus * psi.amplitudes()).norm() > tol::separation)
    report.violations.push_back("psi_outside_registered_subspace");
  if (max_slot_contraction_residual(Psi, psi) > tol::separation)
    report.violations.push_back("psi_not_separated_from_environment");
  double env_weight = 0.0;
  for (int slot = 1; slot <= n; ++slot) {
    const MultiOperator embedded = embed_op(meter.pi_ss(), slot, n, Psi.single_space());
    env_weight = std::max(env_weight,
                          Vector(embedded.matrix * Psi.amplitudes()).norm());
  }
  if (env_weight > tol::separation)
    report.violations.push_back("environment_overlaps_registered_subspace");
  report.hypothesis_violated = !report.violations.empty();

  const FirstWayState fw = first_way(Psi, psi);
  const SecondWayState sw = second_way(Psi, psi);

  const SpectralDecomposition& decomp = meter.measure().decomposition();
  for (int k = 0; k < decomp.size(); ++k) {
    const MultiOperator first_obs = embed_op(decomp.projector(k), n + 1, n + 1,
                                             Psi.single_space());
    const Complex p1 = fw.joint.dot(first_obs.matrix * fw.joint);
    const MultiOperator second_obs = secondway_projector(k, meter, n);
    const Complex p2 = sw.state.amplitudes().dot(second_obs.matrix * sw.state.amplitudes());
    BornEquivalenceRow row;
    row.eigenvalue = decomp.eigenvalues()[static_cast<size_t>(k)];
    row.first_prob = p1.real();
    row.second_prob = p2.real();
    row.deviation = std::abs(row.first_prob - row.second_prob);
    report.max_deviation = std::max(report.max_deviation, row.deviation);
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace imlab
