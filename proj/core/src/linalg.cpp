#include "imlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>

namespace imlab {

double max_abs(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().maxCoeff();
}

double max_abs(const Vector& v) {
  if (v.size() == 0) return 0.0;
  return v.cwiseAbs().maxCoeff();
}

bool is_hermitian(const Matrix& m, double tolerance) {
  if (m.rows() != m.cols()) return false;
  return max_abs(Matrix(m - m.adjoint())) <= tolerance;
}

bool is_projector(const Matrix& m, double tolerance) {
  if (!is_hermitian(m, tolerance)) return false;
  return max_abs(Matrix(m * m - m)) <= tolerance;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

HilbertSpace::HilbertSpace(int dim) : dim_(dim) {
  if (dim < 1) throw InvariantViolation("HilbertSpace dimension must be >= 1");
  labels_.reserve(static_cast<size_t>(dim));
  for (int i = 0; i < dim; ++i) labels_.push_back(std::to_string(i));
}

HilbertSpace::HilbertSpace(int dim, std::vector<std::string> basis_labels)
    : dim_(dim), labels_(std::move(basis_labels)) {
  if (dim < 1) throw InvariantViolation("HilbertSpace dimension must be >= 1");
  if (static_cast<int>(labels_.size()) != dim)
    throw InvariantViolation("HilbertSpace needs one label per basis vector");
  std::set<std::string> distinct(labels_.begin(), labels_.end());
  if (static_cast<int>(distinct.size()) != dim)
    throw InvariantViolation("HilbertSpace basis labels must be distinct");
}

StateVector::StateVector(HilbertSpace space, Vector amplitudes)
    : space_(std::move(space)), amps_(std::move(amplitudes)) {
  if (amps_.size() != space_.dim())
    throw DimensionMismatch("StateVector amplitude count != space dimension");
  if (std::abs(amps_.norm() - 1.0) > tol::unit_norm)
    throw InvariantViolation("StateVector must have unit norm (got " +
                             std::to_string(amps_.norm()) + ")");
}

StateVector StateVector::normalized(HilbertSpace space, const Vector& raw) {
  const double n = raw.norm();
  if (n < tol::zero_symmetrization)
    throw InvariantViolation("cannot normalize a numerically zero vector");
  return StateVector(std::move(space), raw / n);
}

StateVector StateVector::basis(HilbertSpace space, int index) {
  if (index < 0 || index >= space.dim())
    throw InvariantViolation("basis index out of range");
  Vector v = Vector::Zero(space.dim());
  v(index) = 1.0;
  return StateVector(std::move(space), std::move(v));
}

Complex inner(const StateVector& a, const StateVector& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("inner: dimension mismatch");
  return a.amplitudes().dot(b.amplitudes());
}

namespace {

void check_density_invariants(const Matrix& m) {
  if (!is_hermitian(m, tol::hermitian))
    throw InvariantViolation("DensityOperator must be Hermitian");
  if (std::abs(m.trace().real() - 1.0) > tol::unit_trace ||
      std::abs(m.trace().imag()) > tol::unit_trace)
    throw InvariantViolation("DensityOperator must have unit trace");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  if (solver.eigenvalues().minCoeff() < tol::psd_min_eigenvalue)
    throw InvariantViolation("DensityOperator must be positive semidefinite");
}

}  // namespace

DensityOperator::DensityOperator(HilbertSpace space, Matrix matrix)
    : space_(std::move(space)), mat_(std::move(matrix)) {
  if (mat_.rows() != space_.dim() || mat_.cols() != space_.dim())
    throw DimensionMismatch("DensityOperator matrix shape != space dimension");
  check_density_invariants(mat_);
}

DensityOperator DensityOperator::pure(const StateVector& psi) {
  return DensityOperator(psi.space(), psi.amplitudes() * psi.amplitudes().adjoint());
}

DensityOperator DensityOperator::mixture(std::span<const StateVector> states,
                                         std::span<const double> weights) {
  if (states.empty() || states.size() != weights.size())
    throw InvariantViolation("mixture needs matching nonempty states and weights");
  const int d = states.front().dim();
  Matrix m = Matrix::Zero(d, d);
  double total = 0.0;
  for (size_t i = 0; i < states.size(); ++i) {
    if (weights[i] < 0) throw InvariantViolation("mixture weights must be nonnegative");
    if (states[i].dim() != d) throw DimensionMismatch("mixture states on different spaces");
    m += weights[i] * (states[i].amplitudes() * states[i].amplitudes().adjoint());
    total += weights[i];
  }
  if (std::abs(total - 1.0) > tol::unit_trace)
    throw InvariantViolation("mixture weights must sum to 1");
  return DensityOperator(states.front().space(), std::move(m));
}

DensityOperator DensityOperator::maximally_mixed(HilbertSpace space) {
  const int d = space.dim();
  return DensityOperator(std::move(space), Matrix::Identity(d, d) / static_cast<double>(d));
}

HermitianObservable::HermitianObservable(HilbertSpace space, Matrix matrix)
    : space_(std::move(space)), mat_(std::move(matrix)) {
  if (mat_.rows() != space_.dim() || mat_.cols() != space_.dim())
    throw DimensionMismatch("HermitianObservable matrix shape != space dimension");
  if (!is_hermitian(mat_, tol::hermitian))
    throw InvariantViolation("HermitianObservable must be Hermitian");
}

HermitianObservable HermitianObservable::diagonal(HilbertSpace space,
                                                  std::span<const double> values) {
  if (static_cast<int>(values.size()) != space.dim())
    throw DimensionMismatch("diagonal values count != space dimension");
  Matrix m = Matrix::Zero(space.dim(), space.dim());
  for (int i = 0; i < space.dim(); ++i) m(i, i) = values[static_cast<size_t>(i)];
  return HermitianObservable(std::move(space), std::move(m));
}

SpectralDecomposition::SpectralDecomposition(std::vector<double> eigenvalues,
                                             std::vector<Matrix> projectors)
    : values_(std::move(eigenvalues)), projectors_(std::move(projectors)) {
  if (values_.empty() || values_.size() != projectors_.size())
    throw InvariantViolation("SpectralDecomposition needs matching eigenvalues/projectors");
  if (!std::is_sorted(values_.begin(), values_.end()))
    throw InvariantViolation("SpectralDecomposition eigenvalues must be ascending");
  const int d = static_cast<int>(projectors_.front().rows());
  Matrix sum = Matrix::Zero(d, d);
  for (size_t j = 0; j < projectors_.size(); ++j) {
    const Matrix& p = projectors_[j];
    if (p.rows() != d || p.cols() != d)
      throw DimensionMismatch("SpectralDecomposition projectors of unequal shape");
    if (!is_projector(p, tol::projector))
      throw InvariantViolation("SpectralDecomposition entry is not a projector");
    for (size_t k = j + 1; k < projectors_.size(); ++k)
      if (max_abs(Matrix(p * projectors_[k])) > tol::projector)
        throw InvariantViolation("SpectralDecomposition projectors are not orthogonal");
    sum += p;
  }
  if (max_abs(Matrix(sum - Matrix::Identity(d, d))) > tol::projector)
    throw InvariantViolation("SpectralDecomposition projectors must resolve the identity");
}

Matrix SpectralDecomposition::reassemble() const {
  Matrix out = Matrix::Zero(dim(), dim());
  for (size_t k = 0; k < values_.size(); ++k) out += values_[k] * projectors_[k];
  return out;
}

SpectralDecomposition spectral_decompose(const HermitianObservable& observable,
                                         std::optional<double> cluster_tol) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(observable.matrix());
  if (solver.info() != Eigen::Success)
    throw Error("spectral_decompose: eigensolver failed to converge");
  const Eigen::VectorXd evals = solver.eigenvalues();
  const Matrix evecs = solver.eigenvectors();
  const int d = static_cast<int>(evals.size());

  double tolerance = cluster_tol.value_or(1e-9 * evals.cwiseAbs().maxCoeff());
  if (tolerance < 0) throw InvariantViolation("cluster tolerance must be nonnegative");

  std::vector<double> values;
  std::vector<Matrix> projectors;
  int start = 0;
  while (start < d) {
    int stop = start + 1;
    while (stop < d && (evals(stop) == evals(stop - 1) ||
                        evals(stop) - evals(stop - 1) < tolerance))
      ++stop;
    const int width = stop - start;
    projectors.push_back(evecs.middleCols(start, width) *
                         evecs.middleCols(start, width).adjoint());
    values.push_back(evals.segment(start, width).mean());
    start = stop;
  }
  return SpectralDecomposition(std::move(values), std::move(projectors));
}

double born_probability(const DensityOperator& T, const Matrix& P) {
  if (P.rows() != T.dim() || P.cols() != T.dim())
    throw DimensionMismatch("born_probability: projector shape != state dimension");
  if (!is_projector(P, tol::projector))
    throw InvariantViolation("born_probability: P is not a projector");
  // tr(T P) = sum_ij T_ij P_ji, computed without the full product.
  const Complex trace = T.matrix().cwiseProduct(P.transpose()).sum();
  if (std::abs(trace.imag()) > tol::imaginary_residue)
    throw InvariantViolation("born_probability: imaginary residue exceeds tolerance");
  double p = trace.real();
  if (p < 0.0) {
    if (p < -tol::probability_clamp)
      throw InvariantViolation("born_probability: value below 0 beyond clamp tolerance");
    p = 0.0;
  }
  if (p > 1.0) {
    if (p > 1.0 + tol::probability_clamp)
      throw InvariantViolation("born_probability: value above 1 beyond clamp tolerance");
    p = 1.0;
  }
  return p;
}

double expectation(const DensityOperator& T, const HermitianObservable& O) {
  if (O.dim() != T.dim()) throw DimensionMismatch("expectation: dimension mismatch");
  const Complex trace = T.matrix().cwiseProduct(O.matrix().transpose()).sum();
  if (std::abs(trace.imag()) > tol::imaginary_residue)
    throw InvariantViolation("expectation: imaginary residue signals corrupted inputs");
  return trace.real();
}

}  // namespace imlab
