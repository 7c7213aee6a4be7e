#include "imlab/meter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "imlab/report_io.hpp"

namespace imlab {

BorelSet BorelSet::empty() { return BorelSet{}; }

BorelSet BorelSet::real_line() {
  return interval(-std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity());
}

BorelSet BorelSet::interval(double a, double b) {
  return of({{a, b}});
}

BorelSet BorelSet::of(std::vector<std::pair<double, double>> intervals) {
  std::vector<std::pair<double, double>> kept;
  for (auto& [a, b] : intervals) {
    if (std::isnan(a) || std::isnan(b)) throw InvariantViolation("BorelSet: NaN endpoint");
    if (a < b) kept.emplace_back(a, b);
  }
  std::sort(kept.begin(), kept.end());
  BorelSet out;
  for (auto& iv : kept) {
    if (!out.intervals_.empty() && iv.first <= out.intervals_.back().second)
      out.intervals_.back().second = std::max(out.intervals_.back().second, iv.second);
    else
      out.intervals_.push_back(iv);
  }
  return out;
}

bool BorelSet::contains(double x) const {
  for (const auto& [a, b] : intervals_)
    if (a <= x && x < b) return true;
  return false;
}

bool BorelSet::intersects(const BorelSet& other) const {
  for (const auto& [a, b] : intervals_)
    for (const auto& [c, d] : other.intervals_)
      if (std::max(a, c) < std::min(b, d)) return true;
  return false;
}

BorelSet BorelSet::unite(const BorelSet& other) const {
  std::vector<std::pair<double, double>> all(intervals_);
  all.insert(all.end(), other.intervals_.begin(), other.intervals_.end());
  return of(std::move(all));
}

SpectralMeasure::SpectralMeasure(HilbertSpace space, SpectralDecomposition decomposition)
    : space_(std::move(space)), decomp_(std::move(decomposition)) {
  if (decomp_.dim() != space_.dim())
    throw DimensionMismatch("SpectralMeasure: decomposition dimension != space");
}

Matrix SpectralMeasure::projector(const BorelSet& X) const {
  Matrix out = Matrix::Zero(space_.dim(), space_.dim());
  for (int k = 0; k < decomp_.size(); ++k)
    if (X.contains(decomp_.eigenvalues()[static_cast<size_t>(k)]))
      out += decomp_.projector(k);
  return out;
}

HermitianObservable SpectralMeasure::observable() const {
  return HermitianObservable(space_, decomp_.reassemble());
}

Effect::Effect(Matrix matrix) : mat_(std::move(matrix)) {
  if (!is_hermitian(mat_, tol::hermitian))
    throw InvariantViolation("Effect must be Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(mat_, Eigen::EigenvaluesOnly);
  if (solver.eigenvalues().minCoeff() < -tol::effect_spectrum ||
      solver.eigenvalues().maxCoeff() > 1.0 + tol::effect_spectrum)
    throw InvariantViolation("Effect spectrum must lie in [0,1]");
}

bool DomainPredicate::satisfied(const Vector& amplitudes) const {
  for (int idx : forbidden) {
    if (idx < 0 || idx >= amplitudes.size())
      throw InvariantViolation("DomainPredicate: forbidden index out of range");
    if (std::norm(amplitudes(idx)) >= eps_prime) return false;
  }
  return true;
}

DomainPredicate amplitude_bound_predicate(std::vector<int> forbidden, double eps_prime) {
  if (eps_prime <= 0) throw InvariantViolation("amplitude bound eps' must be positive");
  return DomainPredicate{std::move(forbidden), eps_prime};
}

Meter::Meter(std::string name, HermitianObservable observable, SpectralMeasure measure,
             Matrix pi_ss, std::optional<DomainPredicate> predicate)
    : name_(std::move(name)),
      observable_(std::move(observable)),
      measure_(std::move(measure)),
      pi_ss_(std::move(pi_ss)),
      predicate_(std::move(predicate)) {
  if (pi_ss_.rows() != observable_.dim() || pi_ss_.cols() != observable_.dim())
    throw DimensionMismatch("Meter: pi_ss shape != observable dimension");
  if (!is_projector(pi_ss_, tol::projector))
    throw InvariantViolation("Meter: pi_ss is not an orthogonal projector");
}

bool Meter::complete() const {
  return max_abs(Matrix(pi_ss_ - Matrix::Identity(pi_ss_.rows(), pi_ss_.cols()))) <=
         tol::projector;
}

Meter build_meter(std::string name, const HermitianObservable& O,
                  std::span<const int> registered_indices,
                  std::optional<DomainPredicate> predicate) {
  SpectralDecomposition decomp = spectral_decompose(O);
  Matrix pi_ss = Matrix::Zero(O.dim(), O.dim());
  std::set<int> seen;
  for (int k : registered_indices) {
    if (k < 0 || k >= decomp.size())
      throw InvariantViolation("build_meter: registered index out of range");
    if (!seen.insert(k).second) continue;
    pi_ss += decomp.projector(k);
  }
  SpectralMeasure measure(O.space(), std::move(decomp));
  return Meter(std::move(name), O, std::move(measure), std::move(pi_ss),
               std::move(predicate));
}

Meter build_meter(std::string name, const HermitianObservable& O, Matrix pi_ss,
                  std::optional<DomainPredicate> predicate) {
  SpectralMeasure measure(O.space(), spectral_decompose(O));
  return Meter(std::move(name), O, std::move(measure), std::move(pi_ss),
               std::move(predicate));
}

SpectralMeasure coarse_grain(const SpectralMeasure& measure,
                             std::span<const BorelSet> partition) {
  for (size_t i = 0; i < partition.size(); ++i)
    for (size_t j = i + 1; j < partition.size(); ++j)
      if (partition[i].intersects(partition[j]))
        throw InvariantViolation("coarse_grain: partition cells overlap");
  const auto& values = measure.decomposition().eigenvalues();
  for (double o : values) {
    bool covered = false;
    for (const BorelSet& cell : partition) covered = covered || cell.contains(o);
    if (!covered)
      throw InvariantViolation("coarse_grain: spectrum point " + std::to_string(o) +
                               " not covered by the partition");
  }

  std::vector<double> cell_values;
  std::vector<Matrix> cell_projectors;
  for (size_t l = 0; l < partition.size(); ++l) {
    Matrix p = measure.projector(partition[l]);
    if (max_abs(p) <= tol::projector) continue;  // empty cell, no outcome
    cell_values.push_back(static_cast<double>(l + 1));
    cell_projectors.push_back(std::move(p));
  }
  return SpectralMeasure(measure.space(),
                         SpectralDecomposition(std::move(cell_values),
                                               std::move(cell_projectors)));
}

Effect truncated_effect(const Meter& m, const BorelSet& X) {
  return Effect(m.pi_ss() * m.measure().projector(X) * m.pi_ss());
}

std::vector<double> RegisteredDistribution::renormalized() const {
  const double total = 1.0 - no_response;
  std::vector<double> out(probabilities.size(), 0.0);
  if (total <= tol::sampler_floor) return out;
  for (size_t k = 0; k < probabilities.size(); ++k) out[k] = probabilities[k] / total;
  return out;
}

RegisteredDistribution registered_distribution(const Meter& m, const DensityOperator& T) {
  if (T.dim() != m.observable().dim())
    throw DimensionMismatch("registered_distribution: state/meter dimension mismatch");
  const SpectralDecomposition& decomp = m.measure().decomposition();
  RegisteredDistribution out;
  out.eigenvalues = decomp.eigenvalues();
  out.probabilities.reserve(out.eigenvalues.size());
  double responding = 0.0;
  for (int k = 0; k < decomp.size(); ++k) {
    const Matrix effect = m.pi_ss() * decomp.projector(k) * m.pi_ss();
    Complex tr = T.matrix().cwiseProduct(effect.transpose()).sum();
    double p = tr.real();
    if (p < 0.0) {
      if (p < -tol::probability_clamp)
        throw InvariantViolation("registered_distribution: negative probability");
      p = 0.0;
    }
    out.probabilities.push_back(p);
    responding += p;
  }
  double nr = 1.0 - born_probability(T, m.pi_ss());
  if (nr < 0.0) nr = 0.0;
  if (std::abs((responding + nr) - 1.0) > 1e3 * tol::probability_clamp)
    throw InvariantViolation("registered_distribution: probabilities fail to conserve");
  out.no_response = nr;
  return out;
}

std::string to_string(StateClass c) {
  switch (c) {
    case StateClass::in_domain: return "in_domain";
    case StateClass::null_state: return "null";
    case StateClass::partial: return "partial";
  }
  return "unknown";
}

StateClass classify_state(const Meter& m, const DensityOperator& T) {
  if (T.dim() != m.observable().dim())
    throw DimensionMismatch("classify_state: dimension mismatch");
  const Matrix truncated = m.pi_ss() * T.matrix() * m.pi_ss();
  const bool supported = max_abs(Matrix(T.matrix() - truncated)) < tol::domain;
  if (supported) {
    if (!m.domain_predicate()) return StateClass::in_domain;
    // The predicate is per wave function; a mixed state is in the domain only
    // if every weight-carrying eigenvector satisfies it.
    Eigen::SelfAdjointEigenSolver<Matrix> solver(T.matrix());
    bool ok = true;
    for (int i = 0; i < solver.eigenvalues().size(); ++i) {
      if (solver.eigenvalues()(i) <= tol::sampler_floor) continue;
      ok = ok && m.domain_predicate()->satisfied(solver.eigenvectors().col(i));
    }
    if (ok) return StateClass::in_domain;
  }
  const Complex weight = T.matrix().cwiseProduct(m.pi_ss().transpose()).sum();
  if (weight.real() < tol::domain) return StateClass::null_state;
  return StateClass::partial;
}

FrequencyRecord sample_registrations(const Meter& m, const DensityOperator& T,
                                     std::uint64_t shots, std::uint64_t seed) {
  if (shots < 1) throw InvariantViolation("sample_registrations: shots must be >= 1");
  RegisteredDistribution dist = registered_distribution(m, T);

  // Unreachable-outcome floor: a null-set state yields no_response on every
  // draw, for any seed.
  double total = 0.0;
  std::vector<double> probs(dist.probabilities);
  for (double& p : probs) {
    if (p < tol::sampler_floor) p = 0.0;
    total += p;
  }
  double nr = dist.no_response;
  if (total < tol::domain) {
    std::fill(probs.begin(), probs.end(), 0.0);
    total = 0.0;
    nr = 1.0;
  }
  if (nr < tol::sampler_floor) nr = 0.0;
  const double mass = total + nr;
  // Cumulative boundaries over [0,1); the final bucket (no_response when
  // present, else the last live outcome) absorbs the rounding remainder.
  std::vector<double> cumulative(probs.size(), 0.0);
  double acc = 0.0;
  for (size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k] / mass;
    cumulative[k] = acc;
  }

  FrequencyRecord record;
  record.meter_name = m.name();
  record.eigenvalues = dist.eigenvalues;
  record.counts.assign(dist.eigenvalues.size(), 0);
  record.shots = shots;
  record.seed = seed;

  for (std::uint64_t shot = 0; shot < shots; ++shot) {
    const double u = CounterRng::uniform(seed, shot);
    size_t bucket = probs.size();  // no_response by default
    for (size_t k = 0; k < cumulative.size(); ++k) {
      if (probs[k] > 0.0 && u < cumulative[k]) {
        bucket = k;
        break;
      }
    }
    if (bucket < probs.size())
      ++record.counts[bucket];
    else if (nr > 0.0)
      ++record.no_response;
    else if (!probs.empty()) {
      // Rounding sliver above the last boundary with no_response == 0.
      size_t last = probs.size();
      for (size_t k = probs.size(); k-- > 0;)
        if (probs[k] > 0.0) { last = k; break; }
      if (last < probs.size()) ++record.counts[last];
      else ++record.no_response;
    } else {
      ++record.no_response;
    }
  }
  return record;
}

std::string frequency_record_csv(const FrequencyRecord& record) {
  std::ostringstream os;
  os << "outcome,count,frequency\n";
  for (size_t k = 0; k < record.eigenvalues.size(); ++k)
    os << format_double(record.eigenvalues[k]) << "," << record.counts[k] << ","
       << format_double(record.frequency(k)) << "\n";
  os << "no_response," << record.no_response << ","
     << format_double(record.no_response_frequency()) << "\n";
  return os.str();
}

std::string frequency_record_sidecar(const FrequencyRecord& record) {
  nlohmann::json j;
  j["meter"] = record.meter_name;
  j["seed"] = record.seed;
  j["shots"] = record.shots;
  return canonical_json(j);
}

}  // namespace imlab
