#include "imlab/multiparticle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace imlab {

namespace {

constexpr long long kMaxDenseEntries = 100000;  // documented desk-scale bound
constexpr long long kMaxDenseOperatorEntries = 400000;

long long checked_power(int dim, int slots) {
  long long size = 1;
  for (int i = 0; i < slots; ++i) {
    size *= dim;
    if (size > kMaxDenseEntries)
      throw InvariantViolation("product dimension " + std::to_string(dim) + "^" +
                               std::to_string(slots) + " exceeds the dense bound " +
                               std::to_string(kMaxDenseEntries));
  }
  return size;
}

// Parity of the permutation given as image list (0-based), by inversion count.
int permutation_parity(std::span<const int> perm) {
  int inversions = 0;
  for (size_t i = 0; i < perm.size(); ++i)
    for (size_t j = i + 1; j < perm.size(); ++j)
      if (perm[i] > perm[j]) ++inversions;
  return (inversions % 2 == 0) ? +1 : -1;
}

// Parity of the permutation that stably sorts `digits` ascending; also
// reports whether any digit repeats.
struct SortInfo {
  int parity;
  bool has_repeat;
};

SortInfo sorting_parity(std::span<const int> digits, std::span<int> scratch_order) {
  const int n = static_cast<int>(digits.size());
  for (int i = 0; i < n; ++i) scratch_order[i] = i;
  std::stable_sort(scratch_order.begin(), scratch_order.begin() + n,
                   [&](int a, int b) { return digits[a] < digits[b]; });
  int inversions = 0;
  bool repeat = false;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j)
      if (scratch_order[i] > scratch_order[j]) ++inversions;
    if (i + 1 < n && digits[scratch_order[i]] == digits[scratch_order[i + 1]]) repeat = true;
  }
  return {(inversions % 2 == 0) ? +1 : -1, repeat};
}

}  // namespace

SymmetrySector::SymmetrySector(Statistics t, int n, HilbertSpace s)
    : tau(t), particles(n), single(std::move(s)) {
  if (n < 1) throw InvariantViolation("SymmetrySector particle count must be >= 1");
  checked_power(single.dim(), n);
}

long long SymmetrySector::product_dim() const {
  return checked_power(single.dim(), particles);
}

SlotIndexer::SlotIndexer(int dim, int slots)
    : dim_(dim), slots_(slots), size_(checked_power(dim, slots)) {
  if (dim < 1 || slots < 1) throw InvariantViolation("SlotIndexer needs dim,slots >= 1");
}

void SlotIndexer::decode(long long flat, std::span<int> digits) const {
  for (int s = slots_ - 1; s >= 0; --s) {
    digits[static_cast<size_t>(s)] = static_cast<int>(flat % dim_);
    flat /= dim_;
  }
}

long long SlotIndexer::encode(std::span<const int> digits) const {
  long long flat = 0;
  for (int s = 0; s < slots_; ++s) flat = flat * dim_ + digits[static_cast<size_t>(s)];
  return flat;
}

MultiState::MultiState(HilbertSpace single, int particles,
                       std::optional<Statistics> symmetry, Vector amplitudes)
    : single_(std::move(single)),
      particles_(particles),
      symmetry_(symmetry),
      amps_(std::move(amplitudes)) {}

MultiState MultiState::product(HilbertSpace single, int particles, Vector amplitudes) {
  if (particles < 1) throw InvariantViolation("MultiState needs >= 1 particle");
  const long long size = checked_power(single.dim(), particles);
  if (amplitudes.size() != size)
    throw DimensionMismatch("MultiState amplitudes length != dim^particles");
  if (std::abs(amplitudes.norm() - 1.0) > tol::unit_norm)
    throw InvariantViolation("MultiState must have unit norm");
  return MultiState(std::move(single), particles, std::nullopt, std::move(amplitudes));
}

MultiState MultiState::symmetric(HilbertSpace single, int particles, Statistics tau,
                                 Vector amplitudes) {
  MultiState m = product(std::move(single), particles, std::move(amplitudes));
  m.symmetry_ = tau;
  if (m.symmetry_defect(tau) > tol::projector)
    throw InvariantViolation("MultiState tagged symmetric is not tau-covariant");
  return m;
}

MultiState MultiState::from_single(const StateVector& psi, std::optional<Statistics> tau) {
  MultiState m = product(psi.space(), 1, psi.amplitudes());
  m.symmetry_ = tau;
  return m;
}

double MultiState::symmetry_defect(Statistics tau) const {
  if (particles_ == 1) return 0.0;
  const SlotIndexer idx(single_.dim(), particles_);
  std::vector<int> perm(static_cast<size_t>(particles_));
  double defect = 0.0;
  for (int s = 1; s < particles_; ++s) {
    std::iota(perm.begin(), perm.end(), 1);
    std::swap(perm[static_cast<size_t>(s - 1)], perm[static_cast<size_t>(s)]);
    const Vector swapped = apply_slot_permutation(amps_, single_.dim(), perm);
    defect = std::max(defect,
                      max_abs(Vector(swapped - static_cast<double>(sign(tau)) * amps_)));
  }
  return defect;
}

Vector apply_slot_permutation(const Vector& amplitudes, int dim, std::span<const int> perm) {
  const int n = static_cast<int>(perm.size());
  const SlotIndexer idx(dim, n);
  if (amplitudes.size() != idx.size())
    throw DimensionMismatch("apply_slot_permutation: length != dim^slots");
  Vector out(amplitudes.size());
  std::vector<int> digits(static_cast<size_t>(n));
  std::vector<int> permuted(static_cast<size_t>(n));
  for (long long flat = 0; flat < idx.size(); ++flat) {
    idx.decode(flat, digits);
    for (int s = 0; s < n; ++s)
      permuted[static_cast<size_t>(s)] = digits[static_cast<size_t>(perm[static_cast<size_t>(s)] - 1)];
    out(flat) = amplitudes(idx.encode(permuted));
  }
  return out;
}

Vector symmetrize_vector(const Vector& amplitudes, int dim, int particles, Statistics tau) {
  const SlotIndexer idx(dim, particles);
  if (amplitudes.size() != idx.size())
    throw DimensionMismatch("symmetrize_vector: length != dim^particles");
  const int n = particles;
  if (n == 1) return amplitudes;

  double factorial = 1.0;
  for (int i = 2; i <= n; ++i) factorial *= i;

  std::vector<int> digits(static_cast<size_t>(n));
  std::vector<int> scratch(static_cast<size_t>(n));
  std::vector<int> perm(static_cast<size_t>(n));
  std::vector<int> permuted(static_cast<size_t>(n));

  Vector out = Vector::Zero(idx.size());
  for (long long flat = 0; flat < idx.size(); ++flat) {
    idx.decode(flat, digits);
    if (!std::is_sorted(digits.begin(), digits.end())) continue;  // representatives only

    const bool repeat =
        std::adjacent_find(digits.begin(), digits.end()) != digits.end();
    if (repeat && tau == Statistics::fermion) continue;  // exact Pauli zero

    // Group average on the representative.
    Complex acc = 0.0;
    std::iota(perm.begin(), perm.end(), 0);
    do {
      for (int s = 0; s < n; ++s)
        permuted[static_cast<size_t>(s)] = digits[static_cast<size_t>(perm[static_cast<size_t>(s)])];
      const double w =
          (tau == Statistics::fermion) ? permutation_parity(perm) : 1.0;
      acc += w * amplitudes(idx.encode(permuted));
    } while (std::next_permutation(perm.begin(), perm.end()));
    acc /= factorial;
    out(flat) = acc;
  }

  // Fill each orbit from its representative; sign copies keep the result
  // exactly tau-covariant.
  for (long long flat = 0; flat < idx.size(); ++flat) {
    idx.decode(flat, digits);
    if (std::is_sorted(digits.begin(), digits.end())) continue;
    const SortInfo info = sorting_parity(digits, scratch);
    if (info.has_repeat && tau == Statistics::fermion) {
      out(flat) = 0.0;
      continue;
    }
    std::vector<int> sorted(digits);
    std::sort(sorted.begin(), sorted.end());
    const Complex rep = out(idx.encode(sorted));
    out(flat) = (tau == Statistics::fermion && info.parity < 0) ? -rep : rep;
  }
  return out;
}

Matrix symmetrizer_matrix(int dim, int particles, Statistics tau) {
  const SlotIndexer idx(dim, particles);
  if (idx.size() * idx.size() > kMaxDenseOperatorEntries)
    throw InvariantViolation("symmetrizer matrix exceeds the dense bound");
  Matrix out = Matrix::Zero(idx.size(), idx.size());
  std::vector<int> perm(static_cast<size_t>(particles));
  std::vector<int> digits(static_cast<size_t>(particles));
  std::vector<int> permuted(static_cast<size_t>(particles));
  double factorial = 1.0;
  for (int i = 2; i <= particles; ++i) factorial *= i;

  std::iota(perm.begin(), perm.end(), 0);
  do {
    const double w = (tau == Statistics::fermion) ? permutation_parity(perm) : 1.0;
    for (long long col = 0; col < idx.size(); ++col) {
      idx.decode(col, digits);
      for (int s = 0; s < particles; ++s)
        permuted[static_cast<size_t>(s)] = digits[static_cast<size_t>(perm[static_cast<size_t>(s)])];
      out(idx.encode(permuted), col) += w / factorial;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

namespace {

SymmetrizedProduct symmetrize_product_vector(Vector tensored, const HilbertSpace& single,
                                             int total, Statistics tau) {
  Vector projected = symmetrize_vector(tensored, single.dim(), total, tau);
  const double norm = projected.norm();
  if (norm < tol::zero_symmetrization)
    throw ZeroSymmetrization("tau-symmetrized projection vanished");
  projected /= norm;
  return SymmetrizedProduct{
      MultiState::symmetric(single, total, tau, std::move(projected)), 1.0 / norm};
}

}  // namespace

SymmetrizedProduct tensor_and_symmetrize(std::span<const MultiState> factors, Statistics tau) {
  if (factors.empty()) throw InvariantViolation("tensor_and_symmetrize: no factors");
  const HilbertSpace& single = factors.front().single_space();
  int total = 0;
  Vector tensored = Vector::Ones(1);
  for (const MultiState& f : factors) {
    if (!(f.single_space() == single))
      throw DimensionMismatch("tensor_and_symmetrize: factors over different single spaces");
    total += f.particles();
    checked_power(single.dim(), total);
    tensored = kron(tensored, f.amplitudes());
  }
  return symmetrize_product_vector(std::move(tensored), single, total, tau);
}

SymmetrizedProduct tensor_and_symmetrize(std::span<const StateVector> factors, Statistics tau) {
  std::vector<MultiState> lifted;
  lifted.reserve(factors.size());
  for (const StateVector& f : factors) lifted.push_back(MultiState::from_single(f));
  return tensor_and_symmetrize(std::span<const MultiState>(lifted), tau);
}

MultiOperator embed_op(const Matrix& single_op, int slot, int particles,
                       const HilbertSpace& single) {
  if (slot < 1 || slot > particles)
    throw InvariantViolation("embed_op: slot " + std::to_string(slot) +
                             " out of range 1.." + std::to_string(particles));
  if (single_op.rows() != single.dim() || single_op.cols() != single.dim())
    throw DimensionMismatch("embed_op: operator shape != single-particle dimension");
  const long long left = checked_power(single.dim(), slot - 1);
  const long long right = checked_power(single.dim(), particles - slot);
  const long long size = checked_power(single.dim(), particles);
  if (size * size > kMaxDenseOperatorEntries)
    throw InvariantViolation("embedded operator exceeds the dense bound");
  Matrix m = kron(kron(Matrix(Matrix::Identity(left, left)), single_op),
                  Matrix(Matrix::Identity(right, right)));
  return MultiOperator{std::move(m), single, particles, {slot}};
}

MultiOperator additive_embed(const Matrix& single_op, int particles,
                             const HilbertSpace& single) {
  const long long size = checked_power(single.dim(), particles);
  Matrix m = Matrix::Zero(size, size);
  std::vector<int> slots;
  for (int k = 1; k <= particles; ++k) {
    m += embed_op(single_op, k, particles, single).matrix;
    slots.push_back(k);
  }
  return MultiOperator{std::move(m), single, particles, std::move(slots)};
}

CyclicExpansion cyclic_expansion(const MultiState& Psi, const StateVector& psi) {
  if (!Psi.symmetry())
    throw InvariantViolation("cyclic_expansion: Psi must be tagged tau-symmetric");
  if (!(Psi.single_space() == psi.space()))
    throw DimensionMismatch("cyclic_expansion: Psi and psi on different single spaces");
  const Statistics tau = *Psi.symmetry();
  const int n = Psi.particles();
  const int total = n + 1;
  const int d = Psi.single_space().dim();
  const SlotIndexer big(d, total);
  const SlotIndexer small(d, n);

  Vector sum = Vector::Zero(big.size());
  std::vector<int> digits(static_cast<size_t>(total));
  std::vector<int> psi_args(static_cast<size_t>(n));
  for (long long flat = 0; flat < big.size(); ++flat) {
    big.decode(flat, digits);
    Complex acc = 0.0;
    for (int K = 1; K <= total; ++K) {
      // Psi takes the arguments after slot K, wrapping around past slot K-1.
      for (int j = 0; j < n; ++j)
        psi_args[static_cast<size_t>(j)] = digits[static_cast<size_t>((K + j) % total)];
      // Weight tau^(N*K): the parity of the (N+1)-rotation that carries psi
      // into slot K. Reduces to tau^(N+1-K) for odd N.
      double w = 1.0;
      if (tau == Statistics::fermion && (n * K) % 2 == 1) w = -1.0;
      acc += w * Psi.amplitudes()(small.encode(psi_args)) *
             psi.amplitudes()(digits[static_cast<size_t>(K - 1)]);
    }
    sum(flat) = acc;
  }

  const double norm = sum.norm();
  if (norm < tol::zero_symmetrization)
    throw ZeroSymmetrization("cyclic expansion vanished");
  sum /= norm;
  return CyclicExpansion{
      MultiState::symmetric(Psi.single_space(), total, tau, std::move(sum)), 1.0 / norm};
}

}  // namespace imlab
