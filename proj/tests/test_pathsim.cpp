#include <doctest.h>

#include <cmath>

#include "csbp/pathsim.hpp"
#include "csbp/stats.hpp"

using namespace csbp;

TEST_CASE("policy validation") {
  const auto m = parse_mechanism("kind=stable alpha=0.5 k=1");
  SimPolicy p;
  p.dt = 0.0;
  CHECK_THROWS_AS(p.validate(m.measure()), ValidationError);
  p = SimPolicy{};
  p.delta = -1.0;
  CHECK_THROWS_AS(p.validate(m.measure()), ValidationError);
  p = SimPolicy{};
  p.T = kInf;  // fixed cutoff with an open horizon needs observers, fine for the engine
  CHECK_THROWS_AS(simulate_coupled(EsscherLadder(m, {0.5}), 1.0, p), ValidationError);
}

TEST_CASE("coupled family is ordered pathwise") {
  const auto m = parse_mechanism("kind=tempered-stable alpha=0.6 k=1 beta=0.2 sigma2=0.5 b=-0.3");
  const auto lad = EsscherLadder::from_spec(m, "power:2", 6);
  SimPolicy p;
  p.T = 2.0;
  p.delta = 1e-3;
  std::size_t checked = 0, bad = 0;
  for (std::uint32_t r = 0; r < 20; ++r) {
    p.replication = r;
    const auto fam = simulate_coupled(lad, 1.0, p);
    REQUIRE(fam.levels() == 7);
    CHECK(fam.eps.back() == 0.0);
    for (std::size_t k = 0; k < fam.times.size(); ++k)
      for (std::size_t l = 0; l + 1 < fam.levels(); ++l) {
        ++checked;
        bad += fam.left[l][k] > fam.left[l + 1][k] || fam.right[l][k] > fam.right[l + 1][k];
      }
  }
  CHECK(checked > 1000);
  CHECK(bad == 0);
}

TEST_CASE("Brownian-only ladder differs by eps sigma2 t") {
  const auto q = parse_mechanism("kind=quadratic a=-1 sigma2=2");
  const EsscherLadder lad(q, {0.4, 0.1});
  SimPolicy p;
  p.T = 1.0;
  p.dt = 0.01;
  const auto fam = simulate_coupled(lad, 1.0, p);
  double worst = 0.0;
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t k = 0; k < fam.times.size(); ++k)
      worst = std::max(worst, std::abs(fam.right[2][k] - fam.right[l][k] - fam.eps[l] * 2.0 * fam.times[k]));
  CHECK(worst < 1e-12);
}

TEST_CASE("same replication, same path") {
  const auto m = parse_mechanism("kind=stable alpha=0.5 k=1");
  const auto lad = EsscherLadder::from_spec(m, "power:2", 3);
  SimPolicy p;
  p.replication = 5;
  const auto a = simulate_coupled(lad, 1.0, p), b = simulate_coupled(lad, 1.0, p);
  CHECK(a.times == b.times);
  CHECK(a.right == b.right);
  p.replication = 6;
  const auto c = simulate_coupled(lad, 1.0, p);
  CHECK(c.right != a.right);
}

TEST_CASE("laplace transform of the simulated levels") {
  const auto m = parse_mechanism("kind=stable alpha=0.5 k=1");
  const auto lad = EsscherLadder::from_spec(m, "power:2", 2);
  SimPolicy p;
  p.delta = 1e-4;
  std::vector<CoupledFamilySample> fams;
  for (std::uint32_t r = 0; r < 4000; ++r) {
    p.replication = r;
    fams.push_back(simulate_coupled(lad, 1.0, p));
  }
  for (std::size_t l = 0; l < 3; ++l) {
    const auto& mech = l < 2 ? lad.level(l) : m;
    const auto e = empirical_laplace(fams, l, 1.0, 1.0);
    const double ref = std::exp(mech.varphi(1.0));
    CHECK(std::abs(e.estimate - ref) <= 4.0 * e.std_error + ref * std::expm1(truncation_gap_bound(mech, 1e-4, 1.0)));
  }
}

TEST_CASE("exact stable increments") {
  PhiloxStream rng(3, 0, StreamRole::aux);
  RunningMean acc;
  for (int i = 0; i < 100000; ++i) acc.add(std::exp(-exact_stable_increment(0.5, 1.0, 0.5, rng)));
  const auto e = acc.estimate();
  CHECK(std::abs(e.mean - std::exp(-0.5)) < 4.0 * e.std_error);
}

TEST_CASE("truncation bound") {
  const auto m = parse_mechanism("kind=stable alpha=0.5 k=1");
  // int_0^d x^2 x^{-3/2} dx / (2 sqrt(pi)) = d^{3/2} / (3 sqrt(pi))
  CHECK(truncation_gap_bound(m, 1e-4, 2.0) == doctest::Approx(2.0 * 1e-6 / (3.0 * std::sqrt(M_PI))).epsilon(1e-8));
}
