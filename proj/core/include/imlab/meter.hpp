#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "imlab/linalg.hpp"
#include "imlab/rng.hpp"

namespace imlab {

/// Finite union of half-open intervals [a, b), kept canonical (sorted,
/// disjoint, merged).
class BorelSet {
 public:
  static BorelSet empty();
  static BorelSet real_line();
  static BorelSet interval(double a, double b);
  static BorelSet of(std::vector<std::pair<double, double>> intervals);

  bool contains(double x) const;
  bool intersects(const BorelSet& other) const;
  BorelSet unite(const BorelSet& other) const;
  const std::vector<std::pair<double, double>>& intervals() const { return intervals_; }
  bool is_empty() const { return intervals_.empty(); }

 private:
  std::vector<std::pair<double, double>> intervals_;
};

/// Borel set -> orthogonal projector, backed by clustered eigendata.
class SpectralMeasure {
 public:
  SpectralMeasure(HilbertSpace space, SpectralDecomposition decomposition);

  const HilbertSpace& space() const { return space_; }
  const SpectralDecomposition& decomposition() const { return decomp_; }

  /// Sum of eigenprojectors with eigenvalue in X (zero matrix if none).
  Matrix projector(const BorelSet& X) const;

  /// The observable this measure integrates: sum of o_k P_k.
  HermitianObservable observable() const;

 private:
  HilbertSpace space_;
  SpectralDecomposition decomp_;
};

/// Positive operator bounded by 1.
class Effect {
 public:
  explicit Effect(Matrix matrix);
  const Matrix& matrix() const { return mat_; }

 private:
  Matrix mat_;
};

/// Predicate domain: registered wave functions must stay below eps' in
/// squared amplitude on every forbidden basis index.
struct DomainPredicate {
  std::vector<int> forbidden;
  double eps_prime;

  bool satisfied(const Vector& amplitudes) const;
};

DomainPredicate amplitude_bound_predicate(std::vector<int> forbidden, double eps_prime);

/// Observable + registered subspace (+ optional predicate domain). The meter
/// is complete iff the registered projector is the identity.
class Meter {
 public:
  Meter(std::string name, HermitianObservable observable, SpectralMeasure measure,
        Matrix pi_ss, std::optional<DomainPredicate> predicate = {});

  const std::string& name() const { return name_; }
  const HermitianObservable& observable() const { return observable_; }
  const SpectralMeasure& measure() const { return measure_; }
  const Matrix& pi_ss() const { return pi_ss_; }
  const std::optional<DomainPredicate>& domain_predicate() const { return predicate_; }
  int outcome_count() const { return measure_.decomposition().size(); }
  bool complete() const;

 private:
  std::string name_;
  HermitianObservable observable_;
  SpectralMeasure measure_;
  Matrix pi_ss_;
  std::optional<DomainPredicate> predicate_;
};

/// Meter registering the listed eigenvalue clusters of O (0-based indices
/// into the ascending clustered spectrum). All indices -> complete meter.
Meter build_meter(std::string name, const HermitianObservable& O,
                  std::span<const int> registered_indices,
                  std::optional<DomainPredicate> predicate = {});
/// Meter with an explicit registered-subspace projector.
Meter build_meter(std::string name, const HermitianObservable& O, Matrix pi_ss,
                  std::optional<DomainPredicate> predicate = {});

/// New measure over the cell index set {1..n}: cell l carries projector
/// Pi(X_l). Cells must be disjoint and cover the spectrum; empty cells are
/// dropped from the outcome list.
SpectralMeasure coarse_grain(const SpectralMeasure& measure,
                             std::span<const BorelSet> partition);

/// Pi_ss Pi(X) Pi_ss. Over all X this family resolves Pi_ss, not 1.
Effect truncated_effect(const Meter& m, const BorelSet& X);

/// Outcome probabilities P_k = tr(T Pi_ss Pi_k Pi_ss) plus the no-response
/// deficit 1 - tr(T Pi_ss).
struct RegisteredDistribution {
  std::vector<double> eigenvalues;
  std::vector<double> probabilities;
  double no_response;

  /// Post-selected view: probabilities renormalized over the responding part.
  std::vector<double> renormalized() const;
};

RegisteredDistribution registered_distribution(const Meter& m, const DensityOperator& T);

enum class StateClass { in_domain, null_state, partial };
std::string to_string(StateClass c);

/// in_domain: T = Pi_ss T Pi_ss (and the predicate, if any, holds on every
/// weight-carrying eigenvector); null: tr(T Pi_ss) ~ 0; otherwise partial.
StateClass classify_state(const Meter& m, const DensityOperator& T);

/// Seeded i.i.d. registration record; equal seeds give equal records.
struct FrequencyRecord {
  std::string meter_name;
  std::vector<double> eigenvalues;
  std::vector<std::uint64_t> counts;
  std::uint64_t no_response = 0;
  std::uint64_t shots = 0;
  std::uint64_t seed = 0;

  double frequency(size_t k) const {
    return static_cast<double>(counts[k]) / static_cast<double>(shots);
  }
  double no_response_frequency() const {
    return static_cast<double>(no_response) / static_cast<double>(shots);
  }
};

FrequencyRecord sample_registrations(const Meter& m, const DensityOperator& T,
                                     std::uint64_t shots, std::uint64_t seed);

/// CSV rows outcome,count,frequency with a trailing no_response row.
std::string frequency_record_csv(const FrequencyRecord& record);
/// JSON sidecar carrying meter name, seed and shot count.
std::string frequency_record_sidecar(const FrequencyRecord& record);

}  // namespace imlab
