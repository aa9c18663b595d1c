#include <doctest.h>

#include <cmath>

#include "csbp/stats.hpp"

using namespace csbp;

TEST_CASE("running mean merge equals sequential") {
  RunningMean a, b, all;
  for (int i = 0; i < 100; ++i) {
    const double v = std::sin(i) * 3 + i * 0.01;
    (i < 37 ? a : b).add(v);
    all.add(v);
  }
  a.merge(b);
  CHECK(a.estimate().mean == doctest::Approx(all.estimate().mean).epsilon(1e-13));
  CHECK(a.estimate().std_error == doctest::Approx(all.estimate().std_error).epsilon(1e-12));
  CHECK(mean_of({1, 2, 3}).mean == doctest::Approx(2.0));
}

TEST_CASE("kaplan-meier without censoring is the ecdf") {
  const SurvivalEcdf e({{3, false}, {1, false}, {2, false}, {2, false}});
  CHECK(e.cdf(0.5) == 0.0);
  CHECK(e.cdf(1.0) == doctest::Approx(0.25));
  CHECK(e.cdf(2.0) == doctest::Approx(0.75));
  CHECK(e.cdf(10.0) == doctest::Approx(1.0));
}

TEST_CASE("kaplan-meier with censoring and mass at infinity") {
  // censored at 1.5 leaves 2 at risk for the event at 2
  const SurvivalEcdf e({{1, false}, {1.5, true}, {2, false}, {3, false}, {kInf, false}});
  CHECK(e.cdf(1.0) == doctest::Approx(0.2));
  CHECK(e.cdf(2.0) == doctest::Approx(1 - 0.8 * (2.0 / 3.0)));
  CHECK(e.censored() == 1);
  CHECK(e.at_infinity() == 1);
  CHECK(e.cdf(100.0) < 1.0);
  // ecdf never decreases
  double prev = 0.0;
  for (const auto& [t, f] : e.steps()) {
    CHECK(f >= prev);
    prev = f;
  }
}

TEST_CASE("ks distance") {
  const SurvivalEcdf e({{0.25, false}, {0.5, false}, {0.75, false}, {1.0, false}});
  // uniform(0,1): largest gap is 0.25 just before each step
  const double ks = ks_distance(e, [](double t) { return std::clamp(t, 0.0, 1.0); });
  CHECK(ks == doctest::Approx(0.25));
  CHECK(ks_distance(e, [](double) { return 0.0; }, 0.6) == doctest::Approx(0.5));
}
