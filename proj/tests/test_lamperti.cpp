#include <doctest.h>

#include <cmath>

#include "csbp/lamperti.hpp"

using namespace csbp;

namespace {
// X_t = x0 + v t, linear between two knots
LevelPath line(double x0, double v, double T) {
  LevelPath p;
  p.t = {0.0, T};
  p.left = {x0, x0 + v * T};
  p.right = p.left;
  return p;
}
}  // namespace

TEST_CASE("linear growth: clock is a logarithm") {
  const auto p = line(1.0, 1.0, 10.0);
  // A(s) = log(1 + s), so Z_t = e^t and sigma_y = log y
  CHECK(first_passage(p, std::exp(2.0)).sigma == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(first_passage(p, std::exp(2.0)).exit == PassageExit::reached);
  const auto z = lamperti_transform(p);
  CHECK(z.value_at(1.0) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  CHECK(z.value_at(std::log(11.0)) == doctest::Approx(11.0).epsilon(1e-9));
  CHECK(std::isnan(z.value_at(3.0)));
  const auto k = killed_explosion_functional(p, 2.0, 1.0);
  CHECK(k.value == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(first_passage(p, 1e6).exit == PassageExit::horizon);
}

TEST_CASE("linear decay to zero takes infinite time") {
  const auto p = line(1.0, -1.0, 2.0);
  const auto z = lamperti_transform(p);
  CHECK(z.hit_zero);
  CHECK(std::isinf(z.zero_time));
  CHECK(first_passage(p, 2.0).exit == PassageExit::hit_zero_first);
}

TEST_CASE("jumps move the clock without time") {
  LevelPath p;
  p.t = {0.0, 1.0, 2.0};
  p.left = {1.0, 1.0, 4.0};
  p.right = {1.0, 3.0, 4.0};
  // clock: 1 on [0,1] at X = 1, then 1/3 on [1,2] at X = 3
  ClockSpec spec;
  spec.log_targets = {std::log(2.0), std::log(3.5)};
  ClockAccumulator c(spec, 1.0);
  CHECK(c.piece(0.0, 1.0, 1.0, 1.0, 0.0, false, false));
  CHECK(c.jump(1.0, 1.0, 3.0));
  CHECK(c.passage()[0] == doctest::Approx(1.0));
  c.piece(1.0, 1.0, 3.0, 4.0, 1.0, false, false);
  // X from 3 to 4 linearly: clock to 3.5 is log(3.5/3)
  CHECK(c.passage()[1] == doctest::Approx(1.0 + std::log(3.5 / 3.0)).epsilon(1e-12));
}

TEST_CASE("clock cap and big level stop the accumulator") {
  ClockSpec spec;
  spec.clock_cap = 0.5;
  ClockAccumulator c(spec, 1.0);
  c.piece(0.0, 10.0, 1.0, 1.0, 0.0, false, false);
  CHECK(c.reason() == StopReason::clock_cap);
  CHECK(c.clock() == doctest::Approx(0.5));
  ClockSpec big;
  big.log_M = std::log(100.0);
  ClockAccumulator d(big, 1.0);
  d.jump(0.0, 1.0, 1000.0);
  CHECK(d.reason() == StopReason::big_level);
}

TEST_CASE("explosion functional with the tail bound") {
  const auto m = parse_mechanism("kind=stable alpha=0.5 k=1");
  const auto p = line(1.0, 1.0, 1e6);
  const auto e = explosion_functional(p, m, 1e5);
  CHECK_FALSE(e.censored);
  CHECK(e.zeta_estimate == doctest::Approx(std::log(1e5)).epsilon(1e-9));
  CHECK(e.tail_bound == doctest::Approx(std::sqrt(M_PI / 1e5)).epsilon(1e-6));
}
