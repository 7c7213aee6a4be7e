#include "imlab/fock.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

namespace imlab {

namespace {

constexpr int kMaxFockDim = 100000;

void enumerate_occupations(int modes, int n_max, bool fermionic, int mode,
                           std::vector<int>& current, int used,
                           std::vector<std::vector<int>>& out) {
  if (mode == modes) {
    out.push_back(current);
    return;
  }
  const int per_mode = fermionic ? 1 : n_max;
  for (int n = 0; n <= std::min(per_mode, n_max - used); ++n) {
    current[static_cast<size_t>(mode)] = n;
    enumerate_occupations(modes, n_max, fermionic, mode + 1, current, used + n, out);
  }
  current[static_cast<size_t>(mode)] = 0;
}

long long occupation_key(std::span<const int> occ, int n_max) {
  long long key = 0;
  for (int n : occ) key = key * (n_max + 1) + n;
  return key;
}

}  // namespace

FockSpace::FockSpace(int modes, Statistics eta, int n_max)
    : modes_(modes), eta_(eta), n_max_(n_max) {
  if (modes < 1) throw InvariantViolation("FockSpace needs >= 1 mode");
  if (eta == Statistics::fermion) n_max_ = std::min(n_max_, modes_);
  if (n_max_ < 0) throw InvariantViolation("FockSpace cutoff must be >= 0");
  std::vector<int> current(static_cast<size_t>(modes), 0);
  enumerate_occupations(modes_, n_max_, eta_ == Statistics::fermion, 0, current, 0, basis_);
  if (static_cast<int>(basis_.size()) > kMaxFockDim)
    throw InvariantViolation("FockSpace basis exceeds the dense bound");

  keys_.reserve(basis_.size());
  key_order_.resize(basis_.size());
  for (const auto& occ : basis_) keys_.push_back(occupation_key(occ, n_max_));
  std::iota(key_order_.begin(), key_order_.end(), 0);
  std::sort(key_order_.begin(), key_order_.end(),
            [&](int a, int b) { return keys_[static_cast<size_t>(a)] < keys_[static_cast<size_t>(b)]; });
}

const std::vector<int>& FockSpace::occupation(int index) const {
  return basis_[static_cast<size_t>(index)];
}

int FockSpace::total_occupation(int index) const {
  const auto& occ = basis_[static_cast<size_t>(index)];
  return std::accumulate(occ.begin(), occ.end(), 0);
}

int FockSpace::index_of(std::span<const int> occupation) const {
  if (static_cast<int>(occupation.size()) != modes_) return -1;
  for (int n : occupation)
    if (n < 0 || n > n_max_) return -1;
  const long long key = occupation_key(occupation, n_max_);
  auto it = std::lower_bound(key_order_.begin(), key_order_.end(), key,
                             [&](int idx, long long k) { return keys_[static_cast<size_t>(idx)] < k; });
  if (it == key_order_.end() || keys_[static_cast<size_t>(*it)] != key) return -1;
  return *it;
}

HilbertSpace FockSpace::as_hilbert_space() const {
  std::vector<std::string> labels;
  labels.reserve(basis_.size());
  for (const auto& occ : basis_) {
    std::ostringstream os;
    os << "n=(";
    for (size_t i = 0; i < occ.size(); ++i) os << (i ? "," : "") << occ[i];
    os << ")";
    labels.push_back(os.str());
  }
  return HilbertSpace(dim(), std::move(labels));
}

LadderOperator ladder(const FockSpace& space, int mode, LadderKind kind) {
  if (mode < 0 || mode >= space.modes())
    throw InvariantViolation("ladder: mode index out of range");
  Matrix create = Matrix::Zero(space.dim(), space.dim());
  for (int col = 0; col < space.dim(); ++col) {
    const std::vector<int>& occ = space.occupation(col);
    const int n_k = occ[static_cast<size_t>(mode)];
    if (space.eta() == Statistics::fermion && n_k == 1) continue;  // Pauli zero
    if (space.total_occupation(col) + 1 > space.n_max()) continue;  // truncated
    std::vector<int> raised(occ);
    ++raised[static_cast<size_t>(mode)];
    const int row = space.index_of(raised);
    if (row < 0) continue;
    if (space.eta() == Statistics::boson) {
      create(row, col) = std::sqrt(static_cast<double>(n_k + 1));
    } else {
      int below = 0;
      for (int j = 0; j < mode; ++j) below += occ[static_cast<size_t>(j)];
      create(row, col) = (below % 2 == 0) ? 1.0 : -1.0;
    }
  }
  if (kind == LadderKind::create) return LadderOperator{mode, kind, std::move(create)};
  return LadderOperator{mode, kind, create.adjoint()};
}

FockState::FockState(FockSpace space, Vector amplitudes)
    : space_(std::move(space)), amps_(std::move(amplitudes)), normalized_(true) {
  if (amps_.size() != space_.dim())
    throw DimensionMismatch("FockState amplitude count != space dimension");
  if (std::abs(amps_.norm() - 1.0) > tol::unit_norm)
    throw InvariantViolation("FockState must have unit norm (use raw() for intermediates)");
}

FockState FockState::raw(FockSpace space, Vector amplitudes) {
  FockState s = vacuum(std::move(space));
  if (amplitudes.size() != s.space_.dim())
    throw DimensionMismatch("FockState amplitude count != space dimension");
  s.amps_ = std::move(amplitudes);
  s.normalized_ = false;
  return s;
}

FockState FockState::vacuum(FockSpace space) {
  std::vector<int> zeros(static_cast<size_t>(space.modes()), 0);
  return basis(std::move(space), zeros);
}

FockState FockState::basis(FockSpace space, std::span<const int> occupation) {
  const int idx = space.index_of(occupation);
  if (idx < 0) throw InvariantViolation("FockState::basis: occupation outside the space");
  Vector v = Vector::Zero(space.dim());
  v(idx) = 1.0;
  return FockState(std::move(space), std::move(v));
}

FockState FockState::normalized_copy() const {
  const double n = amps_.norm();
  if (n < tol::zero_symmetrization)
    throw InvariantViolation("cannot normalize a zero Fock state");
  return FockState(space_, amps_ / n);
}

FockState apply_ladder(const LadderOperator& op, const FockState& s) {
  const FockSpace& space = s.space();
  if (op.matrix.rows() != space.dim())
    throw DimensionMismatch("apply_ladder: operator built for a different space");
  if (op.kind == LadderKind::create) {
    for (int i = 0; i < space.dim(); ++i) {
      if (std::abs(s.amplitudes()(i)) <= 1e-14) continue;
      const int n_k = space.occupation(i)[static_cast<size_t>(op.mode)];
      if (space.eta() == Statistics::fermion && n_k == 1) continue;  // exact zero, not cutoff
      if (space.total_occupation(i) + 1 > space.n_max())
        throw CutoffExceeded("creation on mode " + std::to_string(op.mode) +
                             " leaves the occupation cutoff n_max=" +
                             std::to_string(space.n_max()));
    }
  }
  return FockState::raw(space, op.matrix * s.amplitudes());
}

HermitianObservable additive_fock_observable(const FockSpace& space,
                                             std::span<const double> mode_values) {
  if (static_cast<int>(mode_values.size()) != space.modes())
    throw DimensionMismatch("additive_fock_observable: one value per mode required");
  Matrix m = Matrix::Zero(space.dim(), space.dim());
  for (int i = 0; i < space.dim(); ++i) {
    double value = 0.0;
    const auto& occ = space.occupation(i);
    for (int k = 0; k < space.modes(); ++k)
      value += mode_values[static_cast<size_t>(k)] * occ[static_cast<size_t>(k)];
    m(i, i) = value;
  }
  return HermitianObservable(space.as_hilbert_space(), std::move(m));
}

double fock_expectation(const FockState& s, const HermitianObservable& O) {
  if (!s.is_normalized())
    throw InvariantViolation("fock_expectation: state must be normalized");
  if (O.dim() != s.space().dim())
    throw DimensionMismatch("fock_expectation: dimension mismatch");
  const Complex value = s.amplitudes().dot(O.matrix() * s.amplitudes());
  if (std::abs(value.imag()) > tol::imaginary_residue)
    throw InvariantViolation("fock_expectation: imaginary residue");
  return value.real();
}

CcrDeviation check_ccr(const FockSpace& space, int r, int s) {
  const Matrix ar = ladder(space, r, LadderKind::annihilate).matrix;
  const Matrix as_dag = ladder(space, s, LadderKind::create).matrix;
  const double eta = sign(space.eta());
  Matrix lhs = ar * as_dag - eta * (as_dag * ar);
  if (r == s) lhs -= Matrix::Identity(space.dim(), space.dim());

  CcrDeviation dev{0.0, 0.0};
  for (int col = 0; col < space.dim(); ++col) {
    const double column_max = lhs.col(col).cwiseAbs().maxCoeff();
    dev.full = std::max(dev.full, column_max);
    if (space.total_occupation(col) <= space.n_max() - 1)
      dev.restricted = std::max(dev.restricted, column_max);
  }
  return dev;
}

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Amplitude of the orthonormal symmetric-sector basis vector labelled by the
// occupation tuple of `digits`, at the product basis position `digits`.
// Bosons: sqrt(prod n_i! / N!) on every arrangement; fermions: parity/sqrt(N!)
// relative to the ascending arrangement.
double sector_basis_amplitude(std::span<const int> digits, std::span<const int> occ,
                              Statistics tau, int particles) {
  if (tau == Statistics::boson) {
    double prod = 1.0;
    for (int n : occ) prod *= factorial(n);
    return std::sqrt(prod / factorial(particles));
  }
  int inversions = 0;
  for (size_t i = 0; i < digits.size(); ++i)
    for (size_t j = i + 1; j < digits.size(); ++j)
      if (digits[i] > digits[j]) ++inversions;
  const double sgn = (inversions % 2 == 0) ? 1.0 : -1.0;
  return sgn / std::sqrt(factorial(particles));
}

}  // namespace

FockState occupation_isomorphism(const MultiState& m, const FockSpace& target) {
  if (!m.symmetry())
    throw InvariantViolation("occupation_isomorphism: input must be tagged symmetric");
  if (target.eta() != *m.symmetry())
    throw InvariantViolation("occupation_isomorphism: tau/eta mismatch");
  if (target.modes() != m.single_space().dim())
    throw DimensionMismatch("occupation_isomorphism: mode count != single dimension");
  const int n = m.particles();
  if (target.n_max() < n)
    throw InvariantViolation("occupation_isomorphism: cutoff below particle count");

  const int d = m.single_space().dim();
  const SlotIndexer idx(d, n);
  Vector out = Vector::Zero(target.dim());
  std::vector<int> digits(static_cast<size_t>(n));
  std::vector<int> occ(static_cast<size_t>(d));
  for (long long flat = 0; flat < idx.size(); ++flat) {
    const Complex amp = m.amplitudes()(flat);
    if (amp == Complex(0.0)) continue;
    idx.decode(flat, digits);
    std::fill(occ.begin(), occ.end(), 0);
    for (int dg : digits) ++occ[static_cast<size_t>(dg)];
    if (*m.symmetry() == Statistics::fermion &&
        *std::max_element(occ.begin(), occ.end()) > 1)
      continue;
    const int row = target.index_of(occ);
    if (row < 0) throw InvariantViolation("occupation_isomorphism: tuple outside target");
    out(row) += sector_basis_amplitude(digits, occ, *m.symmetry(), n) * amp;
  }
  return FockState(target, std::move(out));
}

FockState occupation_isomorphism(const MultiState& m) {
  if (!m.symmetry())
    throw InvariantViolation("occupation_isomorphism: input must be tagged symmetric");
  FockSpace target(m.single_space().dim(), *m.symmetry(), m.particles());
  return occupation_isomorphism(m, target);
}

MultiState multistate_from_fock(const FockState& s) {
  const FockSpace& space = s.space();
  int n = -1;
  for (int i = 0; i < space.dim(); ++i) {
    if (std::abs(s.amplitudes()(i)) <= 1e-14) continue;
    if (n < 0) n = space.total_occupation(i);
    if (space.total_occupation(i) != n)
      throw InvariantViolation("multistate_from_fock: state mixes occupation sectors");
  }
  if (n < 1) throw InvariantViolation("multistate_from_fock: needs >= 1 particle support");

  const int d = space.modes();
  const SlotIndexer idx(d, n);
  Vector out = Vector::Zero(idx.size());
  std::vector<int> digits(static_cast<size_t>(n));
  std::vector<int> occ(static_cast<size_t>(d));
  for (long long flat = 0; flat < idx.size(); ++flat) {
    idx.decode(flat, digits);
    std::fill(occ.begin(), occ.end(), 0);
    for (int dg : digits) ++occ[static_cast<size_t>(dg)];
    if (space.eta() == Statistics::fermion &&
        *std::max_element(occ.begin(), occ.end()) > 1)
      continue;
    const int row = space.index_of(occ);
    if (row < 0) continue;
    out(flat) = sector_basis_amplitude(digits, occ, space.eta(), n) * s.amplitudes()(row);
  }
  return MultiState::symmetric(HilbertSpace(d), n, space.eta(), std::move(out));
}

}  // namespace imlab
