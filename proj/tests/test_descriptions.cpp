#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "imlab/descriptions.hpp"
#include "support/oracles.hpp"

using namespace imlab;

namespace {

StateVector basis(int d, int k) { return StateVector::basis(HilbertSpace(d), k); }

// Random tau-symmetric N-particle state supported on the first `span` levels.
MultiState random_env(oracle::Rand& rng, int d, int n, Statistics tau, int span) {
  const HilbertSpace h(d);
  for (int attempt = 0; attempt < 32; ++attempt) {
    Vector raw = Vector::Zero(oracle::ipow(d, n));
    std::vector<int> digits(static_cast<size_t>(n));
    for (long long flat = 0; flat < raw.size(); ++flat) {
      long long r = flat;
      bool inside = true;
      for (int s = n - 1; s >= 0; --s) {
        digits[static_cast<size_t>(s)] = static_cast<int>(r % d);
        r /= d;
        inside = inside && digits[static_cast<size_t>(s)] < span;
      }
      if (inside) raw(flat) = rng.cgaussian();
    }
    Vector sym = symmetrize_vector(raw, d, n, tau);
    if (sym.norm() < 1e-6) continue;
    sym /= sym.norm();
    return MultiState::symmetric(h, n, tau, sym);
  }
  throw std::runtime_error("random_env failed to draw a nonzero symmetric state");
}

}  // namespace

TEST_CASE("first_way is the plain Kronecker product") {
  const MultiState Psi = MultiState::from_single(basis(3, 0), Statistics::boson);
  const FirstWayState fw = first_way(Psi, basis(3, 1));
  Vector expected = Vector::Zero(9);
  expected(1) = 1.0;  // e1 x e2
  CHECK(max_abs(Vector(fw.joint - expected)) < 1e-14);
  CHECK(fw.joint.norm() == doctest::Approx(1.0));

  oracle::Rand rng(11);
  const MultiState Psi2 = random_env(rng, 3, 2, Statistics::boson, 3);
  const StateVector psi = StateVector::normalized(HilbertSpace(3), rng.cvector(3));
  const FirstWayState fw2 = first_way(Psi2, psi);
  CHECK(max_abs(Vector(fw2.joint -
                       oracle::naive_kron(Psi2.amplitudes(), psi.amplitudes()))) < 1e-12);
}

TEST_CASE("second_way: fermionic pair gives the antisymmetric two-particle state") {
  const MultiState Psi = MultiState::from_single(basis(2, 0), Statistics::fermion);
  const SecondWayState sw = second_way(Psi, basis(2, 1));
  Vector expected = Vector::Zero(4);
  expected(1) = 1.0 / std::sqrt(2.0);
  expected(2) = -1.0 / std::sqrt(2.0);
  const double overlap = std::abs(sw.state.amplitudes().dot(expected));
  CHECK(overlap == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sw.n_exch == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(second_way(Psi, basis(2, 0)), ZeroSymmetrization);
}

TEST_CASE("second_way coefficient 1/sqrt(3) for a separated third particle") {
  oracle::Rand rng(12);
  const int d = 4;
  for (Statistics tau : {Statistics::boson, Statistics::fermion}) {
    const MultiState Psi = random_env(rng, d, 2, tau, 3);
    const SecondWayState sw = second_way(Psi, basis(d, 3));
    // Eq.-style cyclic expansion oracle: N' = 1/sqrt(N+1) when separated.
    const CyclicExpansion ce = cyclic_expansion(Psi, basis(d, 3));
    CHECK(ce.normalization == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-10));
    CHECK(sw.n_exch == doctest::Approx(std::sqrt(3.0)).epsilon(1e-10));
    const double overlap =
        std::abs(sw.state.amplitudes().dot(ce.state.amplitudes()));
    CHECK(overlap == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("recover_first at N=1 returns the plain product with nu = sqrt(2)") {
  for (Statistics tau : {Statistics::boson, Statistics::fermion}) {
    const MultiState Psi = MultiState::from_single(basis(2, 0), tau);
    const StateVector psi = basis(2, 1);
    const SecondWayState sw = second_way(Psi, psi);
    const Recovery rec = recover_first(sw, psi);
    const FirstWayState fw = first_way(Psi, psi);
    CHECK(std::abs(rec.state.joint.dot(fw.joint)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rec.separated);
    CHECK(rec.nu_psi == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("recover_first flags non-separated inputs") {
  // psi equals the environment component: projection survives but the
  // hypothesis is violated and the recovered product is wrong.
  const MultiState Psi = MultiState::from_single(basis(2, 0), Statistics::boson);
  const StateVector psi = basis(2, 0);
  const SecondWayState sw = second_way(Psi, psi);  // e1 x e1, fine for bosons
  const Recovery rec = recover_first(sw, psi);
  CHECK(!rec.separated);
}

TEST_CASE("round trip: 100 randomized separated instances, both statistics") {
  oracle::Rand rng(13);
  int done = 0;
  while (done < 100) {
    const int d = 2 + rng.below(3);           // 2..4
    const int n = 1 + rng.below(2);           // 1..2
    const Statistics tau = rng.below(2) == 0 ? Statistics::boson : Statistics::fermion;
    const int span = d - 1;                   // env on first d-1 levels, psi on the last
    if (span < 1) continue;
    if (tau == Statistics::fermion && n > span) continue;

    const MultiState Psi = random_env(rng, d, n, tau, span);
    const StateVector psi = basis(d, d - 1);
    const SecondWayState sw = second_way(Psi, psi);
    const Recovery rec = recover_first(sw, psi);
    REQUIRE(rec.separated);
    const FirstWayState fw = first_way(Psi, psi);
    CHECK(std::abs(rec.state.joint.dot(fw.joint)) > 1.0 - 1e-10);
    CHECK(rec.nu_psi ==
          doctest::Approx(std::sqrt(n + 1.0)).epsilon(1e-10));
    CHECK(sw.n_exch == doctest::Approx(std::sqrt(n + 1.0)).epsilon(1e-10));
    ++done;
  }
}

TEST_CASE("slot covariance: recovery through any slot matches slot N+1") {
  oracle::Rand rng(14);
  for (Statistics tau : {Statistics::boson, Statistics::fermion}) {
    const int d = 3, n = 2;
    const MultiState Psi = random_env(rng, d, n, tau, 2);
    const StateVector psi = basis(d, 2);
    const SecondWayState sw = second_way(Psi, psi);
    const Recovery direct = recover_first(sw, psi);
    for (int slot = 1; slot <= n; ++slot) {
      const Recovery via = recover_first_slot(sw, psi, slot);
      const double overlap = std::abs(via.state.joint.dot(direct.state.joint));
      CHECK(overlap == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("recover_first degenerates on a fully overlapping fermion projection") {
  // Antisymmetric pair (e1,e2); projecting the last slot onto e3 kills it.
  const HilbertSpace h(3);
  oracle::Rand rng(15);
  const MultiState Psi = MultiState::from_single(StateVector::basis(h, 0),
                                                 Statistics::fermion);
  const SecondWayState sw = second_way(Psi, StateVector::basis(h, 1));
  CHECK_THROWS_AS(recover_first(sw, StateVector::basis(h, 2)), RecoveryDegenerate);
}

namespace {

Meter model_meter(int d, const std::vector<int>& registered) {
  const HilbertSpace h(d);
  std::vector<double> diag(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) diag[static_cast<size_t>(i)] = 1.0 + i;
  const auto O = HermitianObservable::diagonal(h, diag);
  return build_meter("model", O, registered);
}

}  // namespace

TEST_CASE("secondway projector: N=0 reduces to Pi_k Pi_ss") {
  const Meter m = model_meter(3, {1, 2});
  const MultiOperator p1 = secondway_projector(1, m, 0);  // registered
  CHECK(max_abs(Matrix(p1.matrix - m.measure().decomposition().projector(1))) < 1e-12);
  const MultiOperator p0 = secondway_projector(0, m, 0);  // unregistered
  CHECK(max_abs(p0.matrix) < 1e-12);
}

TEST_CASE("secondway projector: idempotent on the working sector, not off it") {
  const Meter m = model_meter(3, {1, 2});  // H_ss = span{e2,e3}
  const HilbertSpace h(3);
  const MultiState Psi = MultiState::from_single(StateVector::basis(h, 0),
                                                 Statistics::boson);
  const MultiOperator p = secondway_projector(1, m, 1);  // k=1 registered

  // Working sector: span of second_way(e1, psi') for psi' in H_ss.
  const SecondWayState s2 = second_way(Psi, StateVector::basis(h, 1));
  const SecondWayState s3 = second_way(Psi, StateVector::basis(h, 2));
  const Matrix delta = p.matrix * p.matrix - p.matrix;
  for (const SecondWayState* s : {&s2, &s3})
    CHECK(Vector(delta * s->state.amplitudes()).norm() < 1e-10);

  // Off-sector counterexample: e2 x e2 doubles under the additive sum.
  Vector off = Vector::Zero(9);
  off(1 * 3 + 1) = 1.0;
  CHECK(Vector(delta * off).norm() > 0.1);
}

TEST_CASE("secondway projectors resolve the truncated identity on the sector") {
  const Meter m = model_meter(3, {1, 2});
  const HilbertSpace h(3);
  const MultiState Psi = MultiState::from_single(StateVector::basis(h, 0),
                                                 Statistics::boson);
  // Sum over registered k of Pi'_k acts on the sector as sum_l Pi_ss^(l).
  Matrix sum = Matrix::Zero(9, 9);
  for (int k : {1, 2}) sum += secondway_projector(k, m, 1).matrix;
  Matrix status_sum = Matrix::Zero(9, 9);
  for (int slot = 1; slot <= 2; ++slot)
    status_sum += embed_op(m.pi_ss(), slot, 2, h).matrix;
  for (int j : {1, 2}) {
    const SecondWayState s = second_way(Psi, StateVector::basis(h, j));
    CHECK(Vector((sum - status_sum) * s.state.amplitudes()).norm() < 1e-10);
  }
}

TEST_CASE("born equivalence: concentrated and balanced registered states") {
  const Meter m = model_meter(3, {1, 2});
  const HilbertSpace h(3);
  const MultiState Psi = MultiState::from_single(StateVector::basis(h, 0),
                                                 Statistics::boson);

  // psi = psi_2 (in H_ss): P_2 = 1 in both descriptions.
  const BornEquivalenceReport conc =
      born_equivalence_report(Psi, StateVector::basis(h, 1), m);
  CHECK(!conc.hypothesis_violated);
  CHECK(conc.rows[1].first_prob == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(conc.rows[1].second_prob == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(conc.max_deviation < 1e-10);

  // psi = (psi_2 + psi_3)/sqrt(2): both give (0.5, 0.5).
  Vector amps = Vector::Zero(3);
  amps(1) = 1.0 / std::sqrt(2.0);
  amps(2) = 1.0 / std::sqrt(2.0);
  const BornEquivalenceReport bal =
      born_equivalence_report(Psi, StateVector(h, amps), m);
  CHECK(bal.rows[1].first_prob == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(bal.rows[2].first_prob == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(bal.rows[1].second_prob == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(bal.rows[2].second_prob == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(bal.max_deviation < 1e-10);
}

TEST_CASE("born equivalence against a dense 9-dimensional oracle") {
  oracle::Rand rng(16);
  const Meter m = model_meter(3, {1, 2});
  const HilbertSpace h(3);
  const MultiState Psi = MultiState::from_single(StateVector::basis(h, 0),
                                                 Statistics::boson);
  Vector amps = Vector::Zero(3);
  amps(1) = rng.cgaussian();
  amps(2) = rng.cgaussian();
  const StateVector psi = StateVector::normalized(h, amps);
  const BornEquivalenceReport report = born_equivalence_report(Psi, psi, m);

  // Oracle: everything rebuilt with naive kron/symmetrizer matrices.
  const Vector fw = oracle::naive_kron(Psi.amplitudes(), psi.amplitudes());
  const Matrix sym = oracle::naive_symmetrizer(3, 2, +1);
  Vector sw = sym * fw;
  sw /= sw.norm();
  for (int k = 0; k < 3; ++k) {
    const Matrix pk = m.measure().decomposition().projector(k);
    const Matrix first_obs = oracle::naive_kron(Matrix(Matrix::Identity(3, 3)),
                                                Matrix(pk * m.pi_ss()));
    // For the first way the spec observable is 1 x Pi_k.
    const Matrix fw_obs = oracle::naive_kron(Matrix(Matrix::Identity(3, 3)), pk);
    const double p_first = fw.dot(fw_obs * fw).real();
    const Matrix second_obs = oracle::naive_kron(Matrix(pk * m.pi_ss()),
                                                 Matrix(Matrix::Identity(3, 3))) +
                              first_obs;
    const double p_second = sw.dot(second_obs * sw).real();
    CHECK(report.rows[static_cast<size_t>(k)].first_prob ==
          doctest::Approx(p_first).epsilon(1e-10));
    CHECK(report.rows[static_cast<size_t>(k)].second_prob ==
          doctest::Approx(p_second).epsilon(1e-10));
  }
  CHECK(report.max_deviation < 1e-10);
}

TEST_CASE("violated hypothesis: environment inside H_ss breaks the equivalence") {
  const Meter m = model_meter(3, {1, 2});
  const HilbertSpace h(3);
  // Psi = e2 lies inside the registered subspace; psi = e2 as well.
  const MultiState Psi = MultiState::from_single(StateVector::basis(h, 1),
                                                 Statistics::boson);
  const BornEquivalenceReport report =
      born_equivalence_report(Psi, StateVector::basis(h, 1), m);
  CHECK(report.hypothesis_violated);
  CHECK(report.max_deviation > 0.01);
}

TEST_CASE("born equivalence sweep over randomized separated instances") {
  oracle::Rand rng(17);
  int done = 0;
  while (done < 40) {
    const int d = 3 + rng.below(2);  // 3..4
    const int n = 1 + rng.below(2);
    const Statistics tau = rng.below(2) == 0 ? Statistics::boson : Statistics::fermion;
    const int span = d - 2;  // environment levels; H_ss gets the last two
    if (span < 1 || (tau == Statistics::fermion && n > span)) continue;

    const HilbertSpace h(d);
    const MultiState Psi = random_env(rng, d, n, tau, span);
    std::vector<int> registered;
    for (int k = span; k < d; ++k) registered.push_back(k);
    const Meter m = model_meter(d, registered);
    Vector amps = Vector::Zero(d);
    for (int k = span; k < d; ++k) amps(k) = rng.cgaussian();
    const StateVector psi = StateVector::normalized(h, amps);

    const BornEquivalenceReport report = born_equivalence_report(Psi, psi, m);
    REQUIRE(!report.hypothesis_violated);
    CHECK(report.max_deviation < 1e-10);
    ++done;
  }
}

TEST_CASE("equivalence report serializes to JSON and CSV") {
  const Meter m = model_meter(3, {1, 2});
  const HilbertSpace h(3);
  const MultiState Psi = MultiState::from_single(StateVector::basis(h, 0),
                                                 Statistics::boson);
  const BornEquivalenceReport report =
      born_equivalence_report(Psi, StateVector::basis(h, 1), m);
  const nlohmann::json j = report.to_json();
  CHECK(j["rows"].size() == 3);
  CHECK(j["hypothesis_violated"] == false);
  const std::string csv = report.to_csv();
  CHECK(csv.rfind("eigenvalue,first_way,second_way,deviation\n", 0) == 0);
}
