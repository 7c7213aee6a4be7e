#pragma once

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "imlab/errors.hpp"
#include "imlab/tolerances.hpp"

namespace imlab {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;

/// Largest absolute entry; the max-norm used for all structural identities.
double max_abs(const Matrix& m);
double max_abs(const Vector& v);

bool is_hermitian(const Matrix& m, double tolerance = tol::hermitian);
bool is_projector(const Matrix& m, double tolerance = tol::projector);

/// Kronecker product, first factor most significant in the flat index.
Matrix kron(const Matrix& a, const Matrix& b);
Vector kron(const Vector& a, const Vector& b);

/// Finite-dimensional carrier with semantic names for the basis index
/// (grid cells, spin values, mode labels).
class HilbertSpace {
 public:
  explicit HilbertSpace(int dim);
  HilbertSpace(int dim, std::vector<std::string> basis_labels);

  int dim() const { return dim_; }
  const std::vector<std::string>& basis_labels() const { return labels_; }

  bool operator==(const HilbertSpace& other) const {
    return dim_ == other.dim_ && labels_ == other.labels_;
  }

 private:
  int dim_;
  std::vector<std::string> labels_;
};

/// Unit vector on a HilbertSpace. Unnormalized vectors exist only as raw
/// Eigen intermediates; constructing a StateVector asserts the norm.
class StateVector {
 public:
  StateVector(HilbertSpace space, Vector amplitudes);

  /// Rescales `raw` to unit norm (error if numerically zero).
  static StateVector normalized(HilbertSpace space, const Vector& raw);
  /// Basis vector e_index.
  static StateVector basis(HilbertSpace space, int index);

  const HilbertSpace& space() const { return space_; }
  const Vector& amplitudes() const { return amps_; }
  int dim() const { return space_.dim(); }
  Complex amplitude(int i) const { return amps_(i); }

 private:
  HilbertSpace space_;
  Vector amps_;
};

/// Overlap <a|b>, antilinear in the first argument.
Complex inner(const StateVector& a, const StateVector& b);

/// Positive, trace-1 operator. Hermiticity, positivity and trace are
/// checked once, at construction; operations assume validity.
class DensityOperator {
 public:
  DensityOperator(HilbertSpace space, Matrix matrix);

  static DensityOperator pure(const StateVector& psi);
  static DensityOperator mixture(std::span<const StateVector> states,
                                 std::span<const double> weights);
  static DensityOperator maximally_mixed(HilbertSpace space);

  const HilbertSpace& space() const { return space_; }
  const Matrix& matrix() const { return mat_; }
  int dim() const { return space_.dim(); }

 private:
  HilbertSpace space_;
  Matrix mat_;
};

class HermitianObservable {
 public:
  HermitianObservable(HilbertSpace space, Matrix matrix);

  static HermitianObservable diagonal(HilbertSpace space, std::span<const double> values);

  const HilbertSpace& space() const { return space_; }
  const Matrix& matrix() const { return mat_; }
  int dim() const { return space_.dim(); }

 private:
  HilbertSpace space_;
  Matrix mat_;
};

/// Clustered eigendata: ascending distinct eigenvalues with one orthogonal
/// projector each; projectors resolve the identity.
class SpectralDecomposition {
 public:
  SpectralDecomposition(std::vector<double> eigenvalues, std::vector<Matrix> projectors);

  const std::vector<double>& eigenvalues() const { return values_; }
  const std::vector<Matrix>& projectors() const { return projectors_; }
  const Matrix& projector(int k) const { return projectors_[static_cast<size_t>(k)]; }
  int size() const { return static_cast<int>(values_.size()); }
  int dim() const { return static_cast<int>(projectors_.front().rows()); }

  /// Sum of o_k * P_k (rebuilds the observable this decomposes).
  Matrix reassemble() const;

 private:
  std::vector<double> values_;
  std::vector<Matrix> projectors_;
};

/// Eigendecomposition with clustering: eigenvalues closer than cluster_tol
/// merge into one (possibly degenerate) projector. Default tolerance is
/// 1e-9 times the spectral radius.
SpectralDecomposition spectral_decompose(const HermitianObservable& observable,
                                         std::optional<double> cluster_tol = std::nullopt);

/// tr(T P) for a projector P; clamped into [0,1] only when within
/// tol::probability_clamp of the interval.
double born_probability(const DensityOperator& T, const Matrix& P);

/// tr(T O); the imaginary residue is checked and discarded.
double expectation(const DensityOperator& T, const HermitianObservable& O);

}  // namespace imlab
