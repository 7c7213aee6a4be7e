#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imlab/dynamics.hpp"
#include "imlab/errors.hpp"
#include "imlab/meter.hpp"
#include "imlab/separation.hpp"
#include "imlab/statistics.hpp"

namespace imlab {

inline constexpr const char* kVersion = "0.1.0";

enum class ScenarioKind { two_lab, detector_grid, equivalence, dynamics, separation_check };

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& name);

struct PredicateSpec {
  std::vector<int> forbidden;
  double eps_prime = 0.0;
};

struct MeterSpec {
  std::string name = "meter";
  std::vector<double> diagonal;   // observable eigenvalues in the standard basis
  std::vector<int> registered;    // empty = complete meter
  std::optional<PredicateSpec> predicate;
};

/// Environment object given as a symmetrized basis product e_{i1} ... e_{iN}.
struct EnvironmentObjectSpec {
  std::string label;
  std::vector<int> indices;
};

/// Prepared single-particle state: exactly one of the fields is set.
struct PreparedSpec {
  std::optional<int> basis_index;
  std::vector<Complex> amplitudes;
  std::vector<Complex> registered_coefficients;  // over the registered eigenstates
  std::optional<std::pair<int, int>> support;    // uniform over cells [start, stop)
};

struct HamiltonianSpec {
  std::string preset;  // "", "admissible_random", "status_breaking"
  std::uint64_t preset_seed = 1;
  std::vector<std::vector<Complex>> single_particle;  // d x d Hermitian
  double pair_coupling = 0.0;
  std::vector<std::vector<Complex>> pair_operator;
};

struct SweepSpec {
  int trials = 0;
  std::uint64_t master_seed = 0;
};

struct Tolerances {
  double identity = 1e-12;     // exact-identity checks (two-lab, P_k = |c_k|^2)
  double separation = tol::separation;
  double equivalence = 1e-10;  // round trip, Born equivalence, N'
  double dynamics = tol::dynamics;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::separation_check;
  int dimension = 2;
  Statistics statistics = Statistics::boson;
  std::uint64_t seed = 1;
  std::uint64_t shots = 0;
  std::optional<MeterSpec> meter;
  std::vector<EnvironmentObjectSpec> environment;
  std::optional<PreparedSpec> prepared;
  // two_lab
  int mode_a = 0;
  int mode_b = 1;
  // detector_grid: half-open cell-index intervals [a,b)
  std::vector<std::pair<int, int>> detectors;
  // dynamics
  std::vector<double> time_grid;
  std::optional<HamiltonianSpec> hamiltonian;
  // equivalence sweeps
  std::optional<SweepSpec> sweep;
  Tolerances tolerances;
  bool allow_violation = false;
  bool expect_violation = false;

  static ScenarioConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Reads and validates a config file. Throws ConfigError with context.
ScenarioConfig load_config(const std::string& path);

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string note;
};

struct Report {
  nlohmann::json scenario_echo;
  std::string kind;
  std::vector<CheckResult> checks;
  nlohmann::json tables;
  bool violation_expected = false;
  bool violation_observed = false;
  std::string verdict;       // "pass" | "fail" | "violation demonstrated"
  double wall_seconds = 0.0; // reported out-of-band; not part of report.json
  std::string version = kVersion;
  /// Extra output files (CSV tables, sidecars) as name -> content.
  std::vector<std::pair<std::string, std::string>> extra_files;

  bool all_passed() const;
  int exit_code() const;  // 0 pass, 1 failed checks
  /// Deterministic payload: identical (config, seed) gives identical bytes.
  nlohmann::json to_json() const;
};

Report run_scenario(const ScenarioConfig& cfg);

/// Writes report.json, per-kind CSV tables, and run_meta.json under out_dir.
void emit_report(const Report& report, const std::string& out_dir);

/// Parallelism cap: IMLAB_THREADS when set, else min(hardware, 4).
int thread_cap();

}  // namespace imlab
