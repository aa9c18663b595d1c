#include <doctest.h>

#include <cmath>

#include "csbp/flow.hpp"

using namespace csbp;

namespace {
const BranchingMechanism& stable() {
  static const auto m = parse_mechanism("kind=stable alpha=0.5 k=1");
  return m;
}
// u_t(l) = (sqrt(l) + t/2)^2 for varphi = -sqrt
double stable_u(double t, double l) { return std::pow(std::sqrt(l) + 0.5 * t, 2); }
}  // namespace

TEST_CASE("stable flow closed form") {
  const CumulativeRate cr(stable());
  CHECK(cr.explosive());
  CHECK(cr.solve_ut(1.0, 1.0).u == doctest::Approx(2.25).epsilon(1e-10));
  CHECK(cr.solve_ut(1.0, 0.0).u == doctest::Approx(0.25).epsilon(1e-10));
  for (double t : {0.01, 0.3, 2.0, 17.0})
    for (double l : {0.0, 1e-6, 0.5, 3.0, 1e4}) {
      const auto r = cr.solve_ut(t, l);
      CHECK(r.u == doctest::Approx(stable_u(t, l)).epsilon(1e-9));
      CHECK(r.residual < 1e-8);
    }
  CHECK(cr.solve_ut(0.0, 0.7).u == doctest::Approx(0.7));
}

TEST_CASE("cumulative rate of the stable mechanism") {
  const CumulativeRate cr(stable());
  for (double y : {1e-12, 1e-4, 0.3, 1.0, 50.0}) CHECK(cr.F(y) == doctest::Approx(2.0 * std::sqrt(y)).epsilon(1e-10));
  CHECK(cr.F_inverse(2.0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(cr.integral(0.25, 1.0) == doctest::Approx(1.0).epsilon(1e-10));
  // log-scale solve: int_y^1 du/sqrt(u) = 1 at y = 1/4
  CHECK(std::exp(cr.log_solve_below(0.0, 1.0)) == doctest::Approx(0.25).epsilon(1e-10));
}

TEST_CASE("semigroup on a small grid") {
  const CumulativeRate cr(stable());
  double worst = 0.0;
  for (double t : {0.1, 0.7, 2.0})
    for (double s : {0.2, 1.0})
      for (double l : {0.0, 0.5, 4.0}) {
        const double a = cr.solve_ut(t + s, l).u;
        const double b = cr.solve_ut(t, cr.solve_ut(s, l).u).u;
        worst = std::max(worst, std::abs(a - b) / std::max(1.0, a));
      }
  CHECK(worst < 1e-9);
}

TEST_CASE("explosion time moments and survival") {
  const CumulativeRate cr(stable());
  const auto m1 = cr.zeta_moment(1.0, 1), m2 = cr.zeta_moment(1.0, 2);
  CHECK(m1.value + m1.remainder == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-8));
  CHECK(m2.value + m2.remainder == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(cr.survival_probability(1.0, 1.0) == doctest::Approx(std::exp(-0.25)).epsilon(1e-10));
  // E e^{-q zeta} = x int e^{-xy} e^{-q F(y)} dy, check against quadrature
  const double q = 0.7;
  const auto L = cr.zeta_laplace(1.0, q);
  const auto ref = quad::exp_sinh([&](double y) { return std::exp(-y - 2.0 * q * std::sqrt(y)); }, 0.0);
  CHECK(L.value + L.remainder == doctest::Approx(ref.value).epsilon(1e-8));
  // E_M zeta for the stable case is sqrt(pi / M)
  CHECK(explosion_tail_bound(stable(), 1e4) == doctest::Approx(std::sqrt(M_PI / 1e4)).epsilon(1e-6));
}

TEST_CASE("quadratic flow: both sides of rho") {
  const auto q = parse_mechanism("kind=quadratic a=-1 sigma2=2");
  const CumulativeRate cr(q);
  CHECK_FALSE(cr.explosive());
  // du/dt = u - u^2 (logistic) from u0
  auto logistic = [](double t, double u0) { return u0 * std::exp(t) / (1.0 - u0 + u0 * std::exp(t)); };
  for (double t : {0.1, 1.0, 5.0})
    for (double u0 : {0.2, 0.5, 3.0}) CHECK(cr.solve_ut(t, u0).u == doctest::Approx(logistic(t, u0)).epsilon(1e-9));
  CHECK(cr.solve_ut(1.0, 1.0).u == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cr.solve_ut(2.0, 0.0).u == 0.0);
}

TEST_CASE("killed truncated integral against direct quadrature") {
  const auto lvl = stable().esscher_shift(0.25);
  const double h = 0.5, x = 1.0;
  const double ref =
      quad::exp_sinh([&](double l) { return std::exp(-l * x) / (h + (std::sqrt(l + 0.25) - 0.5)); }, 0.0).value;
  CHECK(expected_truncated_integral(lvl, x, h) == doctest::Approx(ref).epsilon(1e-8));
  CHECK_THROWS_AS(expected_truncated_integral(lvl, x, 0.0), DomainError);
}
