#include "imlab/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>
#include <utility>

#include "imlab/descriptions.hpp"
#include "imlab/fock.hpp"
#include "imlab/report_io.hpp"

namespace imlab {

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::two_lab: return "two_lab";
    case ScenarioKind::detector_grid: return "detector_grid";
    case ScenarioKind::equivalence: return "equivalence";
    case ScenarioKind::dynamics: return "dynamics";
    case ScenarioKind::separation_check: return "separation_check";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_string(const std::string& name) {
  if (name == "two_lab") return ScenarioKind::two_lab;
  if (name == "detector_grid") return ScenarioKind::detector_grid;
  if (name == "equivalence") return ScenarioKind::equivalence;
  if (name == "dynamics") return ScenarioKind::dynamics;
  if (name == "separation_check") return ScenarioKind::separation_check;
  throw ConfigError("unknown scenario kind '" + name + "'");
}

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& ctx, const std::string& what) {
  throw ConfigError(ctx + ": " + what);
}

const json& need(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) bad(ctx, std::string("missing field '") + key + "'");
  return j.at(key);
}

int as_int(const json& v, const std::string& ctx) {
  if (!v.is_number_integer()) bad(ctx, "expected an integer");
  return v.get<int>();
}

double as_double(const json& v, const std::string& ctx) {
  if (!v.is_number()) bad(ctx, "expected a number");
  return v.get<double>();
}

Complex as_complex(const json& v, const std::string& ctx) {
  if (v.is_number()) return Complex(v.get<double>(), 0.0);
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return Complex(v[0].get<double>(), v[1].get<double>());
  bad(ctx, "expected a real number or [re, im]");
}

std::vector<Complex> as_complex_vector(const json& v, const std::string& ctx) {
  if (!v.is_array()) bad(ctx, "expected an array");
  std::vector<Complex> out;
  for (size_t i = 0; i < v.size(); ++i)
    out.push_back(as_complex(v[i], ctx + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::vector<Complex>> as_complex_matrix(const json& v, const std::string& ctx) {
  if (!v.is_array()) bad(ctx, "expected an array of rows");
  std::vector<std::vector<Complex>> out;
  for (size_t i = 0; i < v.size(); ++i)
    out.push_back(as_complex_vector(v[i], ctx + "[" + std::to_string(i) + "]"));
  return out;
}

void check_known_keys(const json& j, std::initializer_list<const char*> known,
                      const std::string& ctx) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) bad(ctx, "unknown field '" + it.key() + "'");
  }
}

json complex_to_json(const Complex& c) {
  if (c.imag() == 0.0) return json(c.real());
  return json::array({c.real(), c.imag()});
}

}  // namespace

ScenarioConfig ScenarioConfig::from_json(const json& j) {
  const std::string ctx = "config";
  if (!j.is_object()) bad(ctx, "top level must be an object");
  check_known_keys(j,
                   {"kind", "dimension", "statistics", "seed", "shots", "meter",
                    "environment", "prepared", "two_lab", "detectors", "time_grid",
                    "hamiltonian", "sweep", "tolerances", "allow_violation",
                    "expect_violation"},
                   ctx);

  ScenarioConfig cfg;
  const json& kind_field = need(j, "kind", ctx);
  if (!kind_field.is_string()) bad(ctx, "'kind' must be a string");
  cfg.kind = scenario_kind_from_string(kind_field.get<std::string>());
  cfg.dimension = as_int(need(j, "dimension", ctx), ctx + ".dimension");
  if (cfg.dimension < 1) bad(ctx, "'dimension' must be >= 1");
  if (j.contains("statistics"))
    cfg.statistics = statistics_from_string(j.at("statistics").get<std::string>());
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("shots")) cfg.shots = j.at("shots").get<std::uint64_t>();
  if (j.contains("allow_violation")) cfg.allow_violation = j.at("allow_violation").get<bool>();
  if (j.contains("expect_violation"))
    cfg.expect_violation = j.at("expect_violation").get<bool>();

  if (j.contains("meter")) {
    const json& m = j.at("meter");
    const std::string mctx = ctx + ".meter";
    check_known_keys(m, {"name", "diagonal", "registered", "predicate"}, mctx);
    MeterSpec spec;
    if (m.contains("name")) spec.name = m.at("name").get<std::string>();
    if (m.contains("diagonal")) {
      for (size_t i = 0; i < m.at("diagonal").size(); ++i)
        spec.diagonal.push_back(
            as_double(m.at("diagonal")[i], mctx + ".diagonal[" + std::to_string(i) + "]"));
      if (static_cast<int>(spec.diagonal.size()) != cfg.dimension)
        bad(mctx, "'diagonal' length must equal dimension");
      for (size_t i = 1; i < spec.diagonal.size(); ++i)
        if (spec.diagonal[i] <= spec.diagonal[i - 1])
          bad(mctx,
              "'diagonal' must be strictly ascending so registered indices are unambiguous");
    }
    if (m.contains("registered")) {
      for (size_t i = 0; i < m.at("registered").size(); ++i) {
        const int k = as_int(m.at("registered")[i],
                             mctx + ".registered[" + std::to_string(i) + "]");
        if (k < 0 || k >= cfg.dimension) bad(mctx, "registered index out of range");
        spec.registered.push_back(k);
      }
    }
    if (m.contains("predicate")) {
      const json& p = m.at("predicate");
      check_known_keys(p, {"forbidden", "eps_prime"}, mctx + ".predicate");
      PredicateSpec pred;
      for (const auto& v : need(p, "forbidden", mctx + ".predicate"))
        pred.forbidden.push_back(as_int(v, mctx + ".predicate.forbidden"));
      pred.eps_prime = as_double(need(p, "eps_prime", mctx + ".predicate"),
                                 mctx + ".predicate.eps_prime");
      if (pred.eps_prime <= 0) bad(mctx + ".predicate", "'eps_prime' must be positive");
      spec.predicate = std::move(pred);
    }
    cfg.meter = std::move(spec);
  }

  if (j.contains("environment")) {
    const json& env = j.at("environment");
    if (!env.is_array()) bad(ctx + ".environment", "expected an array");
    for (size_t i = 0; i < env.size(); ++i) {
      const std::string ectx = ctx + ".environment[" + std::to_string(i) + "]";
      check_known_keys(env[i], {"label", "indices"}, ectx);
      EnvironmentObjectSpec spec;
      spec.label = env[i].contains("label") ? env[i].at("label").get<std::string>()
                                            : "object_" + std::to_string(i);
      for (const auto& v : need(env[i], "indices", ectx)) {
        const int k = as_int(v, ectx + ".indices");
        if (k < 0 || k >= cfg.dimension) bad(ectx, "index out of range");
        spec.indices.push_back(k);
      }
      if (spec.indices.empty()) bad(ectx, "'indices' must be nonempty");
      cfg.environment.push_back(std::move(spec));
    }
  }

  if (j.contains("prepared")) {
    const json& p = j.at("prepared");
    const std::string pctx = ctx + ".prepared";
    check_known_keys(p, {"basis_index", "amplitudes", "registered_coefficients", "support"},
                     pctx);
    PreparedSpec spec;
    int forms = 0;
    if (p.contains("basis_index")) {
      spec.basis_index = as_int(p.at("basis_index"), pctx + ".basis_index");
      if (*spec.basis_index < 0 || *spec.basis_index >= cfg.dimension)
        bad(pctx, "'basis_index' out of range");
      ++forms;
    }
    if (p.contains("amplitudes")) {
      spec.amplitudes = as_complex_vector(p.at("amplitudes"), pctx + ".amplitudes");
      if (static_cast<int>(spec.amplitudes.size()) != cfg.dimension)
        bad(pctx, "'amplitudes' length must equal dimension");
      ++forms;
    }
    if (p.contains("registered_coefficients")) {
      spec.registered_coefficients = as_complex_vector(p.at("registered_coefficients"),
                                                       pctx + ".registered_coefficients");
      ++forms;
    }
    if (p.contains("support")) {
      const json& s = p.at("support");
      if (!s.is_array() || s.size() != 2) bad(pctx, "'support' must be [start, stop)");
      spec.support = {as_int(s[0], pctx + ".support"), as_int(s[1], pctx + ".support")};
      if (spec.support->first < 0 || spec.support->second > cfg.dimension ||
          spec.support->first >= spec.support->second)
        bad(pctx, "'support' must satisfy 0 <= start < stop <= dimension");
      ++forms;
    }
    if (forms != 1)
      bad(pctx, "exactly one of basis_index|amplitudes|registered_coefficients|support");
    cfg.prepared = std::move(spec);
  }

  if (j.contains("two_lab")) {
    const json& t = j.at("two_lab");
    check_known_keys(t, {"mode_a", "mode_b"}, ctx + ".two_lab");
    cfg.mode_a = as_int(need(t, "mode_a", ctx + ".two_lab"), ctx + ".two_lab.mode_a");
    cfg.mode_b = as_int(need(t, "mode_b", ctx + ".two_lab"), ctx + ".two_lab.mode_b");
    if (cfg.mode_a < 0 || cfg.mode_a >= cfg.dimension || cfg.mode_b < 0 ||
        cfg.mode_b >= cfg.dimension)
      bad(ctx + ".two_lab", "mode out of range");
    if (cfg.mode_a == cfg.mode_b) bad(ctx + ".two_lab", "modes must differ");
  }

  if (j.contains("detectors")) {
    const json& det = j.at("detectors");
    if (!det.is_array()) bad(ctx + ".detectors", "expected an array of [start, stop)");
    for (size_t i = 0; i < det.size(); ++i) {
      const std::string dctx = ctx + ".detectors[" + std::to_string(i) + "]";
      if (!det[i].is_array() || det[i].size() != 2) bad(dctx, "expected [start, stop)");
      const int a = as_int(det[i][0], dctx);
      const int b = as_int(det[i][1], dctx);
      if (a < 0 || b > cfg.dimension || a >= b)
        bad(dctx, "cells must satisfy 0 <= start < stop <= dimension");
      cfg.detectors.emplace_back(a, b);
    }
    auto sorted = cfg.detectors;
    std::sort(sorted.begin(), sorted.end());
    for (size_t i = 1; i < sorted.size(); ++i)
      if (sorted[i].first < sorted[i - 1].second)
        bad(ctx + ".detectors", "active volumes must be disjoint");
  }

  if (j.contains("time_grid")) {
    for (const auto& v : j.at("time_grid"))
      cfg.time_grid.push_back(as_double(v, ctx + ".time_grid"));
  }

  if (j.contains("hamiltonian")) {
    const json& h = j.at("hamiltonian");
    const std::string hctx = ctx + ".hamiltonian";
    check_known_keys(
        h, {"preset", "preset_seed", "single_particle", "pair_coupling", "pair_operator"},
        hctx);
    HamiltonianSpec spec;
    if (h.contains("preset")) {
      spec.preset = h.at("preset").get<std::string>();
      if (spec.preset != "admissible_random" && spec.preset != "status_breaking")
        bad(hctx, "preset must be admissible_random|status_breaking");
    }
    if (h.contains("preset_seed")) spec.preset_seed = h.at("preset_seed").get<std::uint64_t>();
    if (h.contains("single_particle"))
      spec.single_particle =
          as_complex_matrix(h.at("single_particle"), hctx + ".single_particle");
    if (h.contains("pair_coupling"))
      spec.pair_coupling = as_double(h.at("pair_coupling"), hctx + ".pair_coupling");
    if (h.contains("pair_operator"))
      spec.pair_operator = as_complex_matrix(h.at("pair_operator"), hctx + ".pair_operator");
    if (spec.preset.empty() && spec.single_particle.empty())
      bad(hctx, "needs 'preset' or 'single_particle'");
    cfg.hamiltonian = std::move(spec);
  }

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_known_keys(s, {"trials", "master_seed"}, ctx + ".sweep");
    SweepSpec spec;
    spec.trials = as_int(need(s, "trials", ctx + ".sweep"), ctx + ".sweep.trials");
    if (spec.trials < 1) bad(ctx + ".sweep", "'trials' must be >= 1");
    if (s.contains("master_seed")) spec.master_seed = s.at("master_seed").get<std::uint64_t>();
    cfg.sweep = spec;
  }

  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    check_known_keys(t, {"identity", "separation", "equivalence", "dynamics"},
                     ctx + ".tolerances");
    if (t.contains("identity")) cfg.tolerances.identity = as_double(t.at("identity"), ctx);
    if (t.contains("separation"))
      cfg.tolerances.separation = as_double(t.at("separation"), ctx);
    if (t.contains("equivalence"))
      cfg.tolerances.equivalence = as_double(t.at("equivalence"), ctx);
    if (t.contains("dynamics")) cfg.tolerances.dynamics = as_double(t.at("dynamics"), ctx);
    for (double x : {cfg.tolerances.identity, cfg.tolerances.separation,
                     cfg.tolerances.equivalence, cfg.tolerances.dynamics})
      if (x <= 0) bad(ctx + ".tolerances", "tolerances must be positive");
  }

  return cfg;
}

json ScenarioConfig::to_json() const {
  json j;
  j["kind"] = to_string(kind);
  j["dimension"] = dimension;
  j["statistics"] = imlab::to_string(statistics);
  j["seed"] = seed;
  j["shots"] = shots;
  j["allow_violation"] = allow_violation;
  j["expect_violation"] = expect_violation;
  if (meter) {
    json m;
    m["name"] = meter->name;
    if (!meter->diagonal.empty()) m["diagonal"] = meter->diagonal;
    if (!meter->registered.empty()) m["registered"] = meter->registered;
    if (meter->predicate)
      m["predicate"] = json{{"forbidden", meter->predicate->forbidden},
                            {"eps_prime", meter->predicate->eps_prime}};
    j["meter"] = std::move(m);
  }
  if (!environment.empty()) {
    j["environment"] = json::array();
    for (const auto& e : environment)
      j["environment"].push_back(json{{"label", e.label}, {"indices", e.indices}});
  }
  if (prepared) {
    json p;
    if (prepared->basis_index) p["basis_index"] = *prepared->basis_index;
    if (!prepared->amplitudes.empty()) {
      p["amplitudes"] = json::array();
      for (const Complex& c : prepared->amplitudes)
        p["amplitudes"].push_back(complex_to_json(c));
    }
    if (!prepared->registered_coefficients.empty()) {
      p["registered_coefficients"] = json::array();
      for (const Complex& c : prepared->registered_coefficients)
        p["registered_coefficients"].push_back(complex_to_json(c));
    }
    if (prepared->support)
      p["support"] = json::array({prepared->support->first, prepared->support->second});
    j["prepared"] = std::move(p);
  }
  if (kind == ScenarioKind::two_lab)
    j["two_lab"] = json{{"mode_a", mode_a}, {"mode_b", mode_b}};
  if (!detectors.empty()) {
    j["detectors"] = json::array();
    for (const auto& [a, b] : detectors) j["detectors"].push_back(json::array({a, b}));
  }
  if (!time_grid.empty()) j["time_grid"] = time_grid;
  if (hamiltonian) {
    json h;
    if (!hamiltonian->preset.empty()) {
      h["preset"] = hamiltonian->preset;
      h["preset_seed"] = hamiltonian->preset_seed;
    }
    if (!hamiltonian->single_particle.empty()) {
      h["single_particle"] = json::array();
      for (const auto& row : hamiltonian->single_particle) {
        json r = json::array();
        for (const Complex& c : row) r.push_back(complex_to_json(c));
        h["single_particle"].push_back(std::move(r));
      }
    }
    if (hamiltonian->pair_coupling != 0.0) {
      h["pair_coupling"] = hamiltonian->pair_coupling;
      if (!hamiltonian->pair_operator.empty()) {
        h["pair_operator"] = json::array();
        for (const auto& row : hamiltonian->pair_operator) {
          json r = json::array();
          for (const Complex& c : row) r.push_back(complex_to_json(c));
          h["pair_operator"].push_back(std::move(r));
        }
      }
    }
    j["hamiltonian"] = std::move(h);
  }
  if (sweep) j["sweep"] = json{{"trials", sweep->trials}, {"master_seed", sweep->master_seed}};
  j["tolerances"] = json{{"identity", tolerances.identity},
                         {"separation", tolerances.separation},
                         {"equivalence", tolerances.equivalence},
                         {"dynamics", tolerances.dynamics}};
  return j;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return ScenarioConfig::from_json(j);
}

bool Report::all_passed() const {
  for (const CheckResult& c : checks)
    if (!c.passed) return false;
  return true;
}

int Report::exit_code() const { return verdict == "fail" ? 1 : 0; }

json Report::to_json() const {
  json j;
  j["kind"] = kind;
  j["scenario"] = scenario_echo;
  j["verdict"] = verdict;
  j["violation_expected"] = violation_expected;
  j["violation_observed"] = violation_observed;
  j["version"] = version;
  j["checks"] = json::array();
  for (const CheckResult& c : checks) {
    json row;
    row["name"] = c.name;
    row["passed"] = c.passed;
    row["measured"] = c.measured;
    row["threshold"] = c.threshold;
    if (!c.note.empty()) row["note"] = c.note;
    j["checks"].push_back(row);
  }
  j["tables"] = tables;
  return j;
}

int thread_cap() {
  if (const char* env = std::getenv("IMLAB_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::min(hw == 0 ? 1u : hw, 4u));
}

// ---------------------------------------------------------------------------
// Scenario execution
// ---------------------------------------------------------------------------

namespace {

struct Workspace {
  HilbertSpace space;
  std::vector<double> diagonal;
  std::optional<Meter> meter;
  Environment environment;
  std::optional<MultiState> env_state;  // first object's wave function
  std::optional<StateVector> prepared;
};

std::vector<double> observable_diagonal(const ScenarioConfig& cfg) {
  if (cfg.meter && !cfg.meter->diagonal.empty()) return cfg.meter->diagonal;
  std::vector<double> d(static_cast<size_t>(cfg.dimension));
  for (int i = 0; i < cfg.dimension; ++i) d[static_cast<size_t>(i)] = 1.0 + i;
  return d;
}

Meter build_config_meter(const ScenarioConfig& cfg, const HilbertSpace& space,
                         const std::vector<double>& diagonal) {
  const MeterSpec& spec = *cfg.meter;
  const auto O = HermitianObservable::diagonal(space, diagonal);
  std::vector<int> registered = spec.registered;
  if (registered.empty()) {
    registered.resize(static_cast<size_t>(cfg.dimension));
    for (int i = 0; i < cfg.dimension; ++i) registered[static_cast<size_t>(i)] = i;
  }
  std::optional<DomainPredicate> predicate;
  if (spec.predicate)
    predicate =
        amplitude_bound_predicate(spec.predicate->forbidden, spec.predicate->eps_prime);
  return build_meter(spec.name, O, registered, std::move(predicate));
}

MultiState environment_multistate(const EnvironmentObjectSpec& spec,
                                  const HilbertSpace& space, Statistics tau) {
  std::vector<StateVector> factors;
  factors.reserve(spec.indices.size());
  for (int k : spec.indices) factors.push_back(StateVector::basis(space, k));
  try {
    return tensor_and_symmetrize(std::span<const StateVector>(factors), tau).state;
  } catch (const ZeroSymmetrization&) {
    throw ConfigError("environment object '" + spec.label +
                      "' symmetrizes to zero (repeated fermionic indices?)");
  }
}

StateVector build_prepared(const ScenarioConfig& cfg, const HilbertSpace& space) {
  const PreparedSpec& spec = *cfg.prepared;
  if (spec.basis_index) return StateVector::basis(space, *spec.basis_index);
  if (!spec.amplitudes.empty()) {
    Vector v(cfg.dimension);
    for (int i = 0; i < cfg.dimension; ++i) v(i) = spec.amplitudes[static_cast<size_t>(i)];
    return StateVector::normalized(space, v);
  }
  if (spec.support) {
    Vector v = Vector::Zero(cfg.dimension);
    for (int i = spec.support->first; i < spec.support->second; ++i) v(i) = 1.0;
    return StateVector::normalized(space, v);
  }
  // registered_coefficients: over the meter's registered eigenvalue clusters.
  // Config diagonals are strictly ascending, so cluster k <-> basis vector k.
  if (!cfg.meter || cfg.meter->registered.empty())
    throw ConfigError("prepared.registered_coefficients needs meter.registered");
  const auto& regs = cfg.meter->registered;
  if (spec.registered_coefficients.size() != regs.size())
    throw ConfigError("prepared.registered_coefficients length must match meter.registered");
  Vector v = Vector::Zero(cfg.dimension);
  for (size_t i = 0; i < regs.size(); ++i)
    v(regs[i]) = spec.registered_coefficients[i];
  return StateVector::normalized(space, v);
}

Workspace build_workspace(const ScenarioConfig& cfg) {
  Workspace w{HilbertSpace(cfg.dimension), observable_diagonal(cfg), {}, {}, {}, {}};
  if (cfg.meter) w.meter = build_config_meter(cfg, w.space, w.diagonal);
  for (const EnvironmentObjectSpec& spec : cfg.environment) {
    MultiState m = environment_multistate(spec, w.space, cfg.statistics);
    if (!w.env_state) w.env_state = m;
    w.environment.objects.push_back(EnvironmentObject::from_multistate(spec.label, m));
  }
  if (cfg.prepared) w.prepared = build_prepared(cfg, w.space);
  return w;
}

// Assumption-2 gate: abort unless the preparation is separated or the config
// explicitly allows the violation. separation_check scenarios report instead.
void run_gate(const ScenarioConfig& cfg, const Workspace& w, Report& report) {
  const SeparationReport gate =
      has_separation_status(*w.prepared, w.environment, cfg.tolerances.separation);
  report.tables["gate"] = gate.to_json();
  if (!gate.separated && !cfg.allow_violation) {
    std::ostringstream os;
    os << "prepared state is not separated from the environment (";
    for (const auto& e : gate.entries)
      if (!e.separated) os << e.label << " residual " << e.residual << " ";
    os << "); set allow_violation to run anyway";
    throw PreparationViolation(os.str());
  }
  if (!cfg.allow_violation) {
    double worst = 0.0;
    for (const auto& e : gate.entries) worst = std::max(worst, e.residual);
    report.checks.push_back({"preparation_separated", gate.separated, worst,
                             cfg.tolerances.separation, ""});
  }
}

void add_frequency_outputs(Report& report, const FrequencyRecord& record,
                           std::vector<std::pair<std::string, std::string>>& files) {
  json rows = json::array();
  for (size_t k = 0; k < record.eigenvalues.size(); ++k)
    rows.push_back(json{{"outcome", record.eigenvalues[k]},
                        {"count", record.counts[k]},
                        {"frequency", record.frequency(k)}});
  rows.push_back(json{{"outcome", "no_response"},
                      {"count", record.no_response},
                      {"frequency", record.no_response_frequency()}});
  report.tables["frequencies"] = std::move(rows);
  files.emplace_back("frequencies.csv", frequency_record_csv(record));
  files.emplace_back("frequencies.meta.json", frequency_record_sidecar(record));
}

// -- two_lab ----------------------------------------------------------------

void run_two_lab(const ScenarioConfig& cfg, Report& report,
                 std::vector<std::pair<std::string, std::string>>& files) {
  if (cfg.dimension < 2) throw ConfigError("two_lab needs dimension >= 2");
  const std::vector<double> o = observable_diagonal(cfg);

  // Additive Fock observable sees both laboratories at once.
  const FockSpace fock(cfg.dimension, cfg.statistics, 3);
  const auto O = additive_fock_observable(fock, o);
  const FockState vac = FockState::vacuum(fock);
  const auto create_a = ladder(fock, cfg.mode_a, LadderKind::create);
  const auto create_b = ladder(fock, cfg.mode_b, LadderKind::create);
  const FockState two_lab_state =
      apply_ladder(create_a, apply_ladder(create_b, vac)).normalized_copy();
  const double measured = fock_expectation(two_lab_state, O);
  const double expected =
      o[static_cast<size_t>(cfg.mode_a)] + o[static_cast<size_t>(cfg.mode_b)];
  report.checks.push_back(
      {"two_lab_noise_expectation",
       std::abs(measured - expected) < cfg.tolerances.identity,
       std::abs(measured - expected), cfg.tolerances.identity,
       "noise: remote mode contributes to a complete registration"});
  report.tables["fock"] = json{{"expectation", measured},
                               {"local_eigenvalue", o[static_cast<size_t>(cfg.mode_a)]},
                               {"remote_eigenvalue", o[static_cast<size_t>(cfg.mode_b)]}};

  if (!cfg.meter) return;

  // Incomplete-meter rescue: the registered distribution of the prepared
  // single-particle state ignores the remote laboratory entirely.
  Workspace w = build_workspace(cfg);
  if (!w.prepared) w.prepared = StateVector::basis(w.space, cfg.mode_a);
  if (w.environment.objects.empty()) {
    const StateVector remote[] = {StateVector::basis(w.space, cfg.mode_b)};
    w.environment.objects.push_back(
        EnvironmentObject::pure_product("remote_lab_mode", cfg.statistics, remote));
  }
  run_gate(cfg, w, report);

  const Meter& meter = *w.meter;
  const auto T = DensityOperator::pure(*w.prepared);
  const RegisteredDistribution dist = registered_distribution(meter, T);
  json rows = json::array();
  for (size_t k = 0; k < dist.eigenvalues.size(); ++k)
    rows.push_back(
        json{{"outcome", dist.eigenvalues[k]}, {"probability", dist.probabilities[k]}});
  rows.push_back(json{{"outcome", "no_response"}, {"probability", dist.no_response}});
  report.tables["distribution"] = std::move(rows);

  if (!meter.complete()) {
    double local_prob = 0.0;
    double remote_prob = 0.0;
    for (size_t k = 0; k < dist.eigenvalues.size(); ++k) {
      if (std::abs(dist.eigenvalues[k] - o[static_cast<size_t>(cfg.mode_a)]) < 1e-12)
        local_prob = dist.probabilities[k];
      if (std::abs(dist.eigenvalues[k] - o[static_cast<size_t>(cfg.mode_b)]) < 1e-12)
        remote_prob = dist.probabilities[k];
    }
    report.checks.push_back({"incomplete_rescue_local_outcome",
                             std::abs(local_prob - 1.0) < cfg.tolerances.identity,
                             std::abs(local_prob - 1.0), cfg.tolerances.identity,
                             "registered distribution concentrates on the local mode"});
    report.checks.push_back({"incomplete_rescue_no_remote_contribution",
                             remote_prob < cfg.tolerances.identity &&
                                 dist.no_response < cfg.tolerances.identity,
                             std::max(remote_prob, dist.no_response),
                             cfg.tolerances.identity, ""});
  }

  if (cfg.shots > 0)
    add_frequency_outputs(report, sample_registrations(meter, T, cfg.shots, cfg.seed),
                          files);
}

// -- detector_grid ------------------------------------------------------------

void run_detector_grid(const ScenarioConfig& cfg, Report& report,
                       std::vector<std::pair<std::string, std::string>>& files) {
  if (cfg.detectors.empty()) throw ConfigError("detector_grid needs 'detectors'");
  if (!cfg.prepared) throw ConfigError("detector_grid needs 'prepared'");
  const int d = cfg.dimension;

  std::vector<std::string> labels;
  labels.reserve(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) labels.push_back("cell_" + std::to_string(i));
  const HilbertSpace space(d, labels);

  std::vector<double> position(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) position[static_cast<size_t>(i)] = i;
  const auto X = HermitianObservable::diagonal(space, position);
  const SpectralMeasure fine(space, spectral_decompose(X));

  // Partition: one cell per active volume, one cell for everything else.
  std::vector<BorelSet> partition;
  for (const auto& [a, b] : cfg.detectors)
    partition.push_back(BorelSet::interval(a - 0.5, b - 0.5));
  {
    auto sorted = cfg.detectors;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<double, double>> gaps;
    double cursor = -std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : sorted) {
      gaps.emplace_back(cursor, a - 0.5);
      cursor = b - 0.5;
    }
    gaps.emplace_back(cursor, std::numeric_limits<double>::infinity());
    partition.push_back(BorelSet::of(std::move(gaps)));
  }
  const size_t detector_count = cfg.detectors.size();

  const SpectralMeasure coarse = coarse_grain(fine, partition);
  Matrix pi_ss = Matrix::Zero(d, d);
  for (int k = 0; k < coarse.decomposition().size(); ++k)
    if (coarse.decomposition().eigenvalues()[static_cast<size_t>(k)] <
        static_cast<double>(detector_count) + 0.5)
      pi_ss += coarse.decomposition().projector(k);
  const Meter meter("detector_grid", coarse.observable(), coarse, std::move(pi_ss));

  Workspace w{space, position, {}, {}, {}, {}};
  for (const EnvironmentObjectSpec& spec : cfg.environment)
    w.environment.objects.push_back(EnvironmentObject::from_multistate(
        spec.label, environment_multistate(spec, space, cfg.statistics)));
  w.prepared = build_prepared(cfg, space);
  run_gate(cfg, w, report);

  const auto T = DensityOperator::pure(*w.prepared);
  const RegisteredDistribution dist = registered_distribution(meter, T);

  // Independent Born sums per active volume: sum of |psi(cell)|^2.
  json rows = json::array();
  double worst = 0.0;
  double response_mass = 0.0;
  for (size_t l = 0; l < detector_count; ++l) {
    double direct = 0.0;
    for (int cell = cfg.detectors[l].first; cell < cfg.detectors[l].second; ++cell)
      direct += std::norm(w.prepared->amplitudes()(cell));
    double via_meter = 0.0;
    for (size_t k = 0; k < dist.eigenvalues.size(); ++k)
      if (std::abs(dist.eigenvalues[k] - static_cast<double>(l + 1)) < 1e-12)
        via_meter = dist.probabilities[k];
    worst = std::max(worst, std::abs(via_meter - direct));
    response_mass += via_meter;
    rows.push_back(json{
        {"detector", l + 1}, {"probability", via_meter}, {"direct_born_sum", direct}});
  }
  report.tables["detectors"] = std::move(rows);
  report.checks.push_back({"detector_probabilities_match_born_sums",
                           worst < cfg.tolerances.identity, worst,
                           cfg.tolerances.identity, ""});

  if (cfg.shots > 0) {
    const FrequencyRecord record = sample_registrations(meter, T, cfg.shots, cfg.seed);
    add_frequency_outputs(report, record, files);
    if (response_mass < cfg.tolerances.identity) {
      report.checks.push_back(
          {"no_response_certain", record.no_response == record.shots,
           static_cast<double>(record.no_response), static_cast<double>(record.shots),
           "support disjoint from every active volume"});
    } else {
      double band_worst = 0.0;
      for (size_t k = 0; k < record.eigenvalues.size(); ++k) {
        const double p = dist.probabilities[k];
        const double band = 4.0 * std::sqrt(std::max(p * (1.0 - p), 1e-12) /
                                            static_cast<double>(cfg.shots));
        band_worst = std::max(band_worst, std::abs(record.frequency(k) - p) / band);
      }
      report.checks.push_back({"frequencies_within_binomial_band", band_worst < 1.0,
                               band_worst, 1.0, "normalized to the 4-sigma band"});
    }
  }
}

// -- equivalence ---------------------------------------------------------------

struct EquivalenceOutcome {
  double round_trip_deviation;
  double nexch_error;
  double born_deviation;
  bool hypothesis_violated;
};

EquivalenceOutcome evaluate_equivalence(const MultiState& Psi, const StateVector& psi,
                                        const Meter& meter) {
  const SecondWayState sw = second_way(Psi, psi);
  const Recovery rec = recover_first(sw, psi);
  const FirstWayState fw = first_way(Psi, psi);
  const double overlap = std::abs(rec.state.joint.dot(fw.joint));
  const double n = Psi.particles();
  const double nexch_error = std::abs(1.0 / sw.n_exch - 1.0 / std::sqrt(n + 1.0));
  const BornEquivalenceReport born = born_equivalence_report(Psi, psi, meter);
  return {1.0 - overlap, nexch_error, born.max_deviation, born.hypothesis_violated};
}

void run_equivalence(const ScenarioConfig& cfg, Report& report,
                     std::vector<std::pair<std::string, std::string>>& files) {
  if (!cfg.meter) throw ConfigError("equivalence needs 'meter'");
  if (cfg.environment.empty()) throw ConfigError("equivalence needs 'environment'");
  if (!cfg.prepared) throw ConfigError("equivalence needs 'prepared'");
  Workspace w = build_workspace(cfg);
  run_gate(cfg, w, report);

  const MultiState& Psi = *w.env_state;
  const StateVector& psi = *w.prepared;
  const Meter& meter = *w.meter;

  const BornEquivalenceReport born = born_equivalence_report(Psi, psi, meter);
  report.tables["equivalence"] = born.to_json();
  files.emplace_back("equivalence.csv", born.to_csv());

  const EquivalenceOutcome outcome = evaluate_equivalence(Psi, psi, meter);
  report.violation_observed = outcome.hypothesis_violated && outcome.born_deviation > 0.01;

  if (cfg.expect_violation) {
    report.checks.push_back({"violation_demonstrated", report.violation_observed,
                             outcome.born_deviation, 0.01,
                             "hypothesis violated and Born rules disagree"});
  } else {
    report.checks.push_back({"round_trip_overlap",
                             outcome.round_trip_deviation < cfg.tolerances.equivalence,
                             outcome.round_trip_deviation, cfg.tolerances.equivalence, ""});
    report.checks.push_back({"normalization_factor",
                             outcome.nexch_error < cfg.tolerances.equivalence,
                             outcome.nexch_error, cfg.tolerances.equivalence,
                             "N' = 1/sqrt(N+1) for a separated preparation"});
    report.checks.push_back({"born_equivalence_max_deviation",
                             outcome.born_deviation < cfg.tolerances.equivalence,
                             outcome.born_deviation, cfg.tolerances.equivalence, ""});
  }

  if (cfg.sweep) {
    // Randomized instances at the configured (d, statistics, N): environment
    // drawn on the unregistered levels, prepared state on the registered ones.
    std::vector<int> unregistered;
    for (int i = 0; i < cfg.dimension; ++i)
      if (std::find(cfg.meter->registered.begin(), cfg.meter->registered.end(), i) ==
          cfg.meter->registered.end())
        unregistered.push_back(i);
    if (unregistered.empty())
      throw ConfigError("equivalence sweep needs at least one unregistered level");
    const int n = Psi.particles();
    if (cfg.statistics == Statistics::fermion &&
        n > static_cast<int>(unregistered.size()))
      throw ConfigError(
          "equivalence sweep: fermionic environment does not fit the unregistered span");

    double worst_rt = 0.0, worst_nexch = 0.0, worst_born = 0.0;
    for (int trial = 0; trial < cfg.sweep->trials; ++trial) {
      const std::uint64_t trial_seed =
          CounterRng::derive(cfg.sweep->master_seed, static_cast<std::uint64_t>(trial));
      std::uint64_t counter = 0;
      auto gauss = [&]() {
        const double u1 = std::max(CounterRng::uniform(trial_seed, counter++), 1e-300);
        const double u2 = CounterRng::uniform(trial_seed, counter++);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
      };
      auto cgauss = [&]() { return Complex(gauss(), gauss()); };

      Vector raw = Vector::Zero(Psi.product_dim());
      const SlotIndexer idx(cfg.dimension, n);
      std::vector<int> digits(static_cast<size_t>(n));
      for (long long flat = 0; flat < raw.size(); ++flat) {
        idx.decode(flat, digits);
        bool inside = true;
        for (int dg : digits)
          inside = inside && std::find(unregistered.begin(), unregistered.end(), dg) !=
                                 unregistered.end();
        if (inside) raw(flat) = cgauss();
      }
      Vector sym = symmetrize_vector(raw, cfg.dimension, n, cfg.statistics);
      if (sym.norm() < 1e-8) continue;
      sym /= sym.norm();
      const MultiState trial_env = MultiState::symmetric(w.space, n, cfg.statistics, sym);

      Vector amps = Vector::Zero(cfg.dimension);
      for (int k : cfg.meter->registered) amps(k) = cgauss();
      const StateVector trial_psi = StateVector::normalized(w.space, amps);

      const EquivalenceOutcome oc = evaluate_equivalence(trial_env, trial_psi, meter);
      worst_rt = std::max(worst_rt, oc.round_trip_deviation);
      worst_nexch = std::max(worst_nexch, oc.nexch_error);
      worst_born = std::max(worst_born, oc.born_deviation);
    }
    report.tables["sweep"] = json{{"trials", cfg.sweep->trials},
                                  {"max_round_trip_deviation", worst_rt},
                                  {"max_normalization_error", worst_nexch},
                                  {"max_born_deviation", worst_born}};
    report.checks.push_back({"sweep_round_trip", worst_rt < cfg.tolerances.equivalence,
                             worst_rt, cfg.tolerances.equivalence, ""});
    report.checks.push_back({"sweep_normalization",
                             worst_nexch < cfg.tolerances.equivalence, worst_nexch,
                             cfg.tolerances.equivalence, ""});
    report.checks.push_back({"sweep_born_equivalence",
                             worst_born < cfg.tolerances.equivalence, worst_born,
                             cfg.tolerances.equivalence, ""});
  }
}

// -- dynamics -------------------------------------------------------------------

Matrix block_part(const Matrix& h, const Matrix& pi_ss) {
  const Matrix q = Matrix::Identity(pi_ss.rows(), pi_ss.cols()) - pi_ss;
  return pi_ss * h * pi_ss + q * h * q;
}

Matrix seeded_hermitian(int d, std::uint64_t seed) {
  std::uint64_t counter = 0;
  auto gauss = [&]() {
    const double u1 = std::max(CounterRng::uniform(seed, counter++), 1e-300);
    const double u2 = CounterRng::uniform(seed, counter++);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  };
  Matrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = Complex(gauss(), gauss());
  return (a + a.adjoint()) / 2.0;
}

Matrix matrix_from_spec(const std::vector<std::vector<Complex>>& rows, int d,
                        const std::string& what) {
  if (static_cast<int>(rows.size()) != d)
    throw ConfigError(what + " must be a " + std::to_string(d) + "x" + std::to_string(d) +
                      " matrix");
  Matrix m(d, d);
  for (int i = 0; i < d; ++i) {
    if (static_cast<int>(rows[static_cast<size_t>(i)].size()) != d)
      throw ConfigError(what + " must be square");
    for (int j = 0; j < d; ++j)
      m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }
  return m;
}

Hamiltonian build_hamiltonian(const ScenarioConfig& cfg, const HilbertSpace& space,
                              const Meter& meter, int total_slots) {
  const HamiltonianSpec& spec = *cfg.hamiltonian;
  const int d = cfg.dimension;
  Matrix single;
  if (spec.preset == "admissible_random") {
    single = block_part(seeded_hermitian(d, spec.preset_seed), meter.pi_ss());
  } else if (spec.preset == "status_breaking") {
    single = 0.25 * block_part(seeded_hermitian(d, spec.preset_seed), meter.pi_ss());
    // Couple the first registered level to the first unregistered one.
    int inside = -1, outside = -1;
    const Matrix& p = meter.pi_ss();
    for (int i = 0; i < d && (inside < 0 || outside < 0); ++i) {
      if (p(i, i).real() > 0.5 && inside < 0) inside = i;
      if (p(i, i).real() < 0.5 && outside < 0) outside = i;
    }
    if (inside < 0 || outside < 0)
      throw ConfigError("status_breaking preset needs an incomplete meter");
    single(inside, outside) += 1.0;
    single(outside, inside) += 1.0;
  } else {
    single = matrix_from_spec(spec.single_particle, d, "hamiltonian.single_particle");
    if (!is_hermitian(single, tol::hermitian))
      throw ConfigError("hamiltonian.single_particle must be Hermitian");
  }

  Matrix carrier = additive_embed(single, total_slots, space).matrix;
  if (spec.pair_coupling != 0.0) {
    Matrix pair_op =
        spec.pair_operator.empty()
            ? single
            : matrix_from_spec(spec.pair_operator, d, "hamiltonian.pair_operator");
    if (!is_hermitian(pair_op, tol::hermitian))
      throw ConfigError("hamiltonian.pair_operator must be Hermitian");
    for (int l = 1; l <= total_slots; ++l)
      for (int m = l + 1; m <= total_slots; ++m)
        carrier += spec.pair_coupling * (embed_op(pair_op, l, total_slots, space).matrix *
                                         embed_op(pair_op, m, total_slots, space).matrix);
  }
  return Hamiltonian(space, total_slots, std::move(carrier));
}

void run_dynamics(const ScenarioConfig& cfg, Report& report,
                  std::vector<std::pair<std::string, std::string>>& files) {
  if (!cfg.meter) throw ConfigError("dynamics needs 'meter'");
  if (cfg.environment.empty()) throw ConfigError("dynamics needs 'environment'");
  if (!cfg.prepared) throw ConfigError("dynamics needs 'prepared'");
  if (!cfg.hamiltonian) throw ConfigError("dynamics needs 'hamiltonian'");
  Workspace w = build_workspace(cfg);
  run_gate(cfg, w, report);

  const MultiState& Psi = *w.env_state;
  const int total = Psi.particles() + 1;
  const Hamiltonian h = build_hamiltonian(cfg, w.space, *w.meter, total);

  std::vector<double> times = cfg.time_grid;
  if (times.empty())
    for (int i = 1; i <= 20; ++i) times.push_back(i / 20.0);

  const CompatibilityReport compat =
      compatibility_report(h, Psi, *w.prepared, *w.meter, times);
  report.tables["dynamics"] = compat.to_json();
  files.emplace_back("dynamics.csv", compat.to_csv());

  report.checks.push_back({"hamiltonian_commutes_with_symmetrizer",
                           !compat.hypothesis_violated,
                           compat.hypothesis_violated ? 1.0 : 0.0, 0.5, ""});
  report.violation_observed = !compat.status_preserved && compat.max_deviation > 0.01;
  if (cfg.expect_violation) {
    report.checks.push_back({"status_breaking_demonstrated", report.violation_observed,
                             compat.max_deviation, 0.01,
                             "separation status changes along the evolution"});
  } else {
    report.checks.push_back(
        {"status_preserved", compat.status_preserved,
         compat.status_preserved ? 0.0 : 1.0, 0.5,
         "Hamiltonian commutes with every embedded registered projector"});
    report.checks.push_back({"trajectories_compatible",
                             compat.max_deviation < cfg.tolerances.dynamics,
                             compat.max_deviation, cfg.tolerances.dynamics, ""});
  }
}

// -- separation_check -----------------------------------------------------------

void run_separation_check(const ScenarioConfig& cfg, Report& report) {
  if (!cfg.prepared) throw ConfigError("separation_check needs 'prepared'");
  Workspace w = build_workspace(cfg);
  const SeparationReport sep =
      has_separation_status(*w.prepared, w.environment, cfg.tolerances.separation);
  report.tables["separation"] = sep.to_json();
  double worst = 0.0;
  for (const auto& e : sep.entries) worst = std::max(worst, e.residual);
  report.violation_observed = !sep.separated;
  if (cfg.expect_violation) {
    report.checks.push_back({"violation_demonstrated", !sep.separated, worst,
                             cfg.tolerances.separation,
                             "preparation overlaps the environment"});
  } else {
    report.checks.push_back(
        {"separated", sep.separated, worst, cfg.tolerances.separation, ""});
  }
}

}  // namespace

Report run_scenario(const ScenarioConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  Report report;
  report.kind = to_string(cfg.kind);
  report.scenario_echo = cfg.to_json();
  report.violation_expected = cfg.expect_violation;
  report.tables = json::object();

  std::vector<std::pair<std::string, std::string>> files;
  switch (cfg.kind) {
    case ScenarioKind::two_lab: run_two_lab(cfg, report, files); break;
    case ScenarioKind::detector_grid: run_detector_grid(cfg, report, files); break;
    case ScenarioKind::equivalence: run_equivalence(cfg, report, files); break;
    case ScenarioKind::dynamics: run_dynamics(cfg, report, files); break;
    case ScenarioKind::separation_check: run_separation_check(cfg, report); break;
  }
  report.extra_files = std::move(files);

  if (report.all_passed())
    report.verdict = cfg.expect_violation && report.violation_observed
                         ? "violation demonstrated"
                         : "pass";
  else
    report.verdict = "fail";

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void emit_report(const Report& report, const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  write_text_file((dir / "report.json").string(), canonical_json(report.to_json()));
  for (const auto& [name, content] : report.extra_files)
    write_text_file((dir / name).string(), content);
  json meta;
  meta["wall_seconds"] = report.wall_seconds;
  meta["version"] = report.version;
  write_text_file((dir / "run_meta.json").string(), canonical_json(meta));
}

}  // namespace imlab
