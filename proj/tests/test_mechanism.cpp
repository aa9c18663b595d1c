#include <doctest.h>

#include <cmath>

#include "csbp/mechanism.hpp"

using namespace csbp;

TEST_CASE("stable mechanism closed form") {
  const auto m = parse_mechanism("kind=stable alpha=0.5 k=1");
  for (double l : {0.01, 0.5, 1.0, 4.0, 100.0}) CHECK(m.varphi(l) == doctest::Approx(-std::sqrt(l)).epsilon(1e-12));
  CHECK(m.is_subordinator());
  CHECK(std::isinf(m.rho()));
  REQUIRE(m.rv_index().has_value());
  CHECK(*m.rv_index() == doctest::Approx(0.5));
  const auto v = m.explosion_test(1.0);
  CHECK(v.finite);
  CHECK(v.integral == doctest::Approx(2.0).epsilon(1e-6));  // int_0^1 du / sqrt(u)
}

TEST_CASE("tempered stable against quadrature") {
  const double alpha = 0.7, k = 1.3, beta = 0.8;
  const auto m = BranchingMechanism(0.0, 0.0, LevyMeasure::tempered_stable(alpha, k, beta));
  const double c = k * alpha / std::tgamma(1.0 - alpha);
  auto dens = [&](double x) { return c * std::pow(x, -1.0 - alpha) * std::exp(-beta * x); };
  for (double l : {0.1, 1.0, 3.0}) {
    CHECK(m.varphi(l) == doctest::Approx(-k * (std::pow(l + beta, alpha) - std::pow(beta, alpha))).epsilon(1e-10));
    CHECK(m.varphi(l) == doctest::Approx(levy_integral_by_quadrature(dens, l)).epsilon(1e-7));
  }
}

TEST_CASE("quadratic mechanism roots") {
  const auto q = parse_mechanism("kind=quadratic a=-1 sigma2=2");
  CHECK(q.varphi(0.5) == doctest::Approx(-0.25));
  CHECK(q.rho() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(q.gamma() == doctest::Approx(0.5).epsilon(1e-10));
  CHECK_FALSE(q.explosion_test(0.5).finite);  // phi'(0) finite
  CHECK(q.extinction_test(2.0).finite);        // int^inf du / u^2
}

TEST_CASE("Esscher shift is a group action") {
  const auto m = parse_mechanism("kind=tempered-stable alpha=0.5 k=1 beta=0.3 sigma2=0.7 b=-2");
  const double e1 = 0.2, e2 = 0.05;
  const auto s1 = m.esscher_shift(e1);
  const auto s12 = s1.esscher_shift(e2);
  const auto s3 = m.esscher_shift(e1 + e2);
  for (double l : {0.0, 0.3, 1.0, 5.0}) {
    CHECK(s1.varphi(l) == doctest::Approx(m.varphi(l + e1) - m.varphi(e1)).epsilon(1e-12));
    CHECK(s12.varphi(l) == doctest::Approx(s3.varphi(l)).epsilon(1e-12));
  }
  CHECK(s1.sigma2() == doctest::Approx(m.sigma2()));
  CHECK(s3.tilt() == doctest::Approx(e1 + e2));
}

TEST_CASE("ladder specs") {
  const auto m = parse_mechanism("kind=stable alpha=0.5 k=1");
  const auto p = EsscherLadder::from_spec(m, "power:2", 8);
  CHECK(p.size() == 8);
  CHECK(p.eps(0) == doctest::Approx(1.0));
  CHECK(p.eps(p.position(4)) == doctest::Approx(1.0 / 16));
  const auto g = EsscherLadder::from_spec(m, "geom:4", 5);
  CHECK(g.eps(2) == doctest::Approx(std::pow(4.0, -3)));
  const auto l = EsscherLadder::from_spec(m, "list:0.5,0.25,0.1", 3);
  CHECK(l.eps(2) == doctest::Approx(0.1));
  CHECK_THROWS_AS(EsscherLadder::from_spec(m, "list:0.1,0.2", 2), ValidationError);
  CHECK_THROWS_AS(EsscherLadder::from_spec(m, "power", 2), ValidationError);
  const auto q = parse_mechanism("kind=quadratic a=-1 sigma2=2");
  CHECK_THROWS_AS(EsscherLadder(q, {0.7}), ValidationError);  // varphi'(0.7) > 0
}

TEST_CASE("mechanism parse errors") {
  CHECK_THROWS_AS(parse_mechanism("kind=wobbly"), ValidationError);
  CHECK_THROWS_AS(parse_mechanism("kind=stable"), ValidationError);
  CHECK_THROWS_AS(parse_mechanism("kind=stable alpha=1.5"), ValidationError);
  CHECK_THROWS_AS(parse_mechanism("kind=quadratic a=-1 b=2 sigma2=1"), ValidationError);
}
