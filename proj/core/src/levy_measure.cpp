#include "csbp/levy_measure.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include <boost/math/special_functions/gamma.hpp>

#include "csbp/numeric.hpp"

namespace csbp {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// I_j(q) = int_0^1 t^j e^{-q t} dt for j = 0..3, q >= 0.
std::array<double, 4> exp_moments(double q) {
  std::array<double, 4> I{};
  if (q < 2.0) {
    for (int j = 0; j < 4; ++j) {
      double term = 1.0, sum = 0.0;
      for (int k = 0; k < 60; ++k) {
        const double add = term / (j + k + 1);
        sum += add;
        if (std::abs(add) < 1e-18 * std::abs(sum)) break;
        term *= -q / (k + 1);
      }
      I[j] = sum;
    }
    return I;
  }
  const double e = std::exp(-q);
  I[0] = -std::expm1(-q) / q;
  for (int j = 1; j < 4; ++j) I[j] = (j * I[j - 1] - e) / q;
  return I;
}

// int_a^b p(x) x^m e^{-s x} dx with p linear from pa (at a) to pb (at b).
double lin_exp_moment(double a, double b, double pa, double pb, double s, int m) {
  if (b <= a) return 0.0;
  const double h = b - a;
  const auto I = exp_moments(s * h);
  // integrand in t: (pa + dp t) (a + h t)^m, expanded as sum c_j t^j
  const double dp = pb - pa;
  std::array<double, 4> poly{};  // (a + h t)^m coefficients
  if (m == 0) {
    poly = {1, 0, 0, 0};
  } else if (m == 1) {
    poly = {a, h, 0, 0};
  } else {
    poly = {a * a, 2 * a * h, h * h, 0};
  }
  double acc = 0.0;
  for (int j = 0; j < 3; ++j) {
    acc += pa * poly[j] * I[j] + dp * poly[j] * I[j + 1];
  }
  return h * std::exp(-s * a) * acc;
}

double tab_moment(const TabulatedDensity& t, double s, int m, double lo, double hi) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < t.x.size(); ++i) {
    double a = t.x[i], b = t.x[i + 1];
    if (b <= lo || a >= hi) continue;
    const double slope = (t.density[i + 1] - t.density[i]) / (b - a);
    const double a2 = std::max(a, lo), b2 = std::min(b, hi);
    const double pa = t.density[i] + slope * (a2 - a);
    const double pb = t.density[i] + slope * (b2 - a);
    acc += lin_exp_moment(a2, b2, pa, pb, s, m);
  }
  return acc;
}

double stable_coef(const TemperedStable& m) {
  return m.k * m.alpha / std::tgamma(1.0 - m.alpha);
}

// int_0^c x^{p-1} e^{-beta x} dx for p > 0.
double lower_power_exp(double p, double beta, double c) {
  const double z = beta * c;
  if (z < 1.0) {
    double term = 1.0, sum = 0.0;
    for (int j = 0; j < 60; ++j) {
      const double add = term / (j + p);
      sum += add;
      if (std::abs(add) < 1e-17 * std::abs(sum)) break;
      term *= -z / (j + 1);
    }
    return std::pow(c, p) * sum;
  }
  return std::pow(beta, -p) * boost::math::tgamma_lower(p, z);
}

// int_1^inf y^{-1-alpha} e^{-z y} dy
double upper_tail_factor(double alpha, double z) {
  if (z == 0.0) return 1.0 / alpha;
  if (z > 745.0) return 0.0;
  if (z <= 30.0) {
    return (std::exp(-z) - std::pow(z, alpha) * boost::math::tgamma(1.0 - alpha, z)) / alpha;
  }
  double term = 1.0, sum = 0.0;
  for (int j = 0; j < 30; ++j) {
    sum += term;
    term *= -(alpha + 1.0 + j) / z;
    if (std::abs(term) < 1e-17) break;
  }
  return std::exp(-z) / z * sum;
}

}  // namespace

LevyMeasure::LevyMeasure(Kind kind) : kind_(std::move(kind)) { validate(); }

LevyMeasure LevyMeasure::compound_poisson(double rate, JumpLaw law, double shape,
                                          double param) {
  return LevyMeasure(CompoundPoisson{rate, law, shape, param});
}

LevyMeasure LevyMeasure::stable(double alpha, double k) {
  return LevyMeasure(TemperedStable{alpha, k, 0.0});
}

LevyMeasure LevyMeasure::tempered_stable(double alpha, double k, double beta) {
  return LevyMeasure(TemperedStable{alpha, k, beta});
}

LevyMeasure LevyMeasure::tabulated(std::vector<double> x, std::vector<double> density) {
  return LevyMeasure(TabulatedDensity{std::move(x), std::move(density), 0.0});
}

void LevyMeasure::validate() const {
  std::visit(
      overloaded{
          [](const NoJumps&) {},
          [](const CompoundPoisson& m) {
            if (!(m.rate >= 0.0) || !std::isfinite(m.rate))
              throw ValidationError("compound-poisson rate must be finite and >= 0");
            if (m.law == JumpLaw::dirac) {
              if (!(m.param > 0.0)) throw ValidationError("dirac jump location must be > 0");
            } else {
              if (!(m.param > 0.0) || !(m.shape > 0.0))
                throw ValidationError("jump law needs shape > 0 and rate parameter > 0");
            }
          },
          [](const TemperedStable& m) {
            if (!(m.alpha > 0.0 && m.alpha < 1.0))
              throw ValidationError("stable index alpha must lie in (0,1)");
            if (!(m.k > 0.0)) throw ValidationError("stable scale k must be > 0");
            if (!(m.beta >= 0.0)) throw ValidationError("tempering must be >= 0");
          },
          [](const TabulatedDensity& t) {
            if (t.x.size() < 2 || t.x.size() != t.density.size())
              throw ValidationError("tabulated density needs >= 2 matching grid/value points");
            if (!(t.x.front() >= 0.0)) throw ValidationError("tabulated support must be >= 0");
            for (std::size_t i = 0; i < t.x.size(); ++i) {
              if (!(t.density[i] >= 0.0) || !std::isfinite(t.density[i]))
                throw ValidationError("tabulated density values must be finite and >= 0");
              if (i > 0 && !(t.x[i] > t.x[i - 1]))
                throw ValidationError("tabulated grid must be strictly increasing");
            }
            if (!(t.beta >= 0.0)) throw ValidationError("tilt must be >= 0");
            const double m2 = tab_moment(t, t.beta, 2, 0.0, 1.0) +
                              tab_moment(t, t.beta, 0, 1.0, kInf);
            if (!std::isfinite(m2)) throw ValidationError("int (x^2 ^ 1) pi(dx) is not finite");
          },
      },
      kind_);
}

std::string LevyMeasure::kind_name() const {
  return std::visit(overloaded{
                        [](const NoJumps&) { return std::string("none"); },
                        [](const CompoundPoisson&) { return std::string("compound-poisson"); },
                        [](const TemperedStable& m) {
                          return std::string(m.beta == 0.0 ? "stable" : "tempered-stable");
                        },
                        [](const TabulatedDensity&) { return std::string("tabulated-density"); },
                    },
                    kind_);
}

bool LevyMeasure::finite_activity() const {
  return !std::holds_alternative<TemperedStable>(kind_);
}

double LevyMeasure::total_mass() const { return tail_mass(0.0); }

double LevyMeasure::laplace_integral(double lam) const {
  return std::visit(
      overloaded{
          [](const NoJumps&) { return 0.0; },
          [lam](const CompoundPoisson& m) {
            switch (m.law) {
              case JumpLaw::dirac:
                return m.rate * std::expm1(-lam * m.param);
              default:
                return m.rate * std::expm1(-m.shape * std::log1p(lam / m.param));
            }
          },
          [lam](const TemperedStable& m) {
            if (m.beta == 0.0) return -m.k * std::pow(lam, m.alpha);
            return -m.k * std::pow(m.beta, m.alpha) *
                   std::expm1(m.alpha * std::log1p(lam / m.beta));
          },
          [lam](const TabulatedDensity& t) {
            return tab_moment(t, t.beta + lam, 0, 0.0, kInf) - tab_moment(t, t.beta, 0, 0.0, kInf);
          },
      },
      kind_);
}

double LevyMeasure::laplace_integral_d1(double lam) const {
  return std::visit(
      overloaded{
          [](const NoJumps&) { return 0.0; },
          [lam](const CompoundPoisson& m) {
            if (m.law == JumpLaw::dirac) return -m.rate * m.param * std::exp(-lam * m.param);
            return -m.rate * m.shape / m.param * std::pow(1.0 + lam / m.param, -m.shape - 1.0);
          },
          [lam](const TemperedStable& m) {
            return -m.k * m.alpha * std::pow(lam + m.beta, m.alpha - 1.0);
          },
          [lam](const TabulatedDensity& t) { return -tab_moment(t, t.beta + lam, 1, 0.0, kInf); },
      },
      kind_);
}

double LevyMeasure::laplace_integral_d2(double lam) const {
  return std::visit(
      overloaded{
          [](const NoJumps&) { return 0.0; },
          [lam](const CompoundPoisson& m) {
            if (m.law == JumpLaw::dirac)
              return m.rate * m.param * m.param * std::exp(-lam * m.param);
            return m.rate * m.shape * (m.shape + 1.0) / (m.param * m.param) *
                   std::pow(1.0 + lam / m.param, -m.shape - 2.0);
          },
          [lam](const TemperedStable& m) {
            return m.k * m.alpha * (1.0 - m.alpha) * std::pow(lam + m.beta, m.alpha - 2.0);
          },
          [lam](const TabulatedDensity& t) { return tab_moment(t, t.beta + lam, 2, 0.0, kInf); },
      },
      kind_);
}

double LevyMeasure::density(double x) const {
  if (!(x > 0.0)) return 0.0;
  return std::visit(
      overloaded{
          [](const NoJumps&) { return 0.0; },
          [x](const CompoundPoisson& m) {
            if (m.law == JumpLaw::dirac) return 0.0;
            return m.rate * std::exp(m.shape * std::log(m.param) + (m.shape - 1.0) * std::log(x) -
                                     m.param * x - std::lgamma(m.shape));
          },
          [x](const TemperedStable& m) {
            return stable_coef(m) * std::pow(x, -1.0 - m.alpha) * std::exp(-m.beta * x);
          },
          [x](const TabulatedDensity& t) {
            if (x < t.x.front() || x > t.x.back()) return 0.0;
            const auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
            const std::size_t i =
                std::min<std::size_t>(static_cast<std::size_t>(it - t.x.begin()), t.x.size() - 1) - 1;
            const double f = (x - t.x[i]) / (t.x[i + 1] - t.x[i]);
            return (t.density[i] + f * (t.density[i + 1] - t.density[i])) * std::exp(-t.beta * x);
          },
      },
      kind_);
}

double LevyMeasure::mean_below(double c) const {
  if (!(c > 0.0)) return 0.0;
  return std::visit(
      overloaded{
          [](const NoJumps&) { return 0.0; },
          [c](const CompoundPoisson& m) {
            if (m.law == JumpLaw::dirac) return m.param < c ? m.rate * m.param : 0.0;
            return m.rate * m.shape / m.param * boost::math::gamma_p(m.shape + 1.0, m.param * c);
          },
          [c](const TemperedStable& m) {
            return stable_coef(m) * lower_power_exp(1.0 - m.alpha, m.beta, c);
          },
          [c](const TabulatedDensity& t) { return tab_moment(t, t.beta, 1, 0.0, c); },
      },
      kind_);
}

double LevyMeasure::second_moment_below(double c) const {
  if (!(c > 0.0)) return 0.0;
  return std::visit(
      overloaded{
          [](const NoJumps&) { return 0.0; },
          [c](const CompoundPoisson& m) {
            if (m.law == JumpLaw::dirac) return m.param < c ? m.rate * m.param * m.param : 0.0;
            return m.rate * m.shape * (m.shape + 1.0) / (m.param * m.param) *
                   boost::math::gamma_p(m.shape + 2.0, m.param * c);
          },
          [c](const TemperedStable& m) {
            return stable_coef(m) * lower_power_exp(2.0 - m.alpha, m.beta, c);
          },
          [c](const TabulatedDensity& t) { return tab_moment(t, t.beta, 2, 0.0, c); },
      },
      kind_);
}

double LevyMeasure::tail_mass(double c) const {
  c = std::max(c, 0.0);
  return std::visit(
      overloaded{
          [](const NoJumps&) { return 0.0; },
          [c](const CompoundPoisson& m) {
            if (m.law == JumpLaw::dirac) return m.param > c ? m.rate : 0.0;
            if (c == 0.0) return m.rate;
            return m.rate * boost::math::gamma_q(m.shape, m.param * c);
          },
          [c](const TemperedStable& m) {
            if (c == 0.0) return kInf;
            return stable_coef(m) * std::pow(c, -m.alpha) * upper_tail_factor(m.alpha, m.beta * c);
          },
          [c](const TabulatedDensity& t) { return tab_moment(t, t.beta, 0, c, kInf); },
      },
      kind_);
}

double LevyMeasure::sample_above(double c, PhiloxStream& rng) const {
  c = std::max(c, 0.0);
  return std::visit(
      overloaded{
          [](const NoJumps&) -> double { throw DomainError("no jumps to sample"); },
          [c, &rng](const CompoundPoisson& m) -> double {
            if (m.law == JumpLaw::dirac) return m.param;
            std::gamma_distribution<double> g(m.shape, 1.0 / m.param);
            for (int i = 0; i < 1000000; ++i) {
              const double x = g(rng);
              if (x > c) return x;
            }
            throw NumericError("compound-poisson tail rejection did not terminate", c);
          },
          [c, &rng](const TemperedStable& m) -> double {
            if (!(c > 0.0)) throw DomainError("infinite-activity measure needs a cutoff > 0");
            const double z = m.beta * c;
            for (int i = 0; i < 10000000; ++i) {
              double y;
              bool ok;
              if (z < 1.0) {
                y = std::pow(rng.uniform(), -1.0 / m.alpha);
                ok = z == 0.0 || rng.uniform() <= std::exp(-z * (y - 1.0));
              } else {
                y = 1.0 + rng.exponential() / z;
                ok = rng.uniform() <= std::pow(y, -1.0 - m.alpha);
              }
              if (ok) return c * y;
            }
            throw NumericError("tempered-stable rejection did not terminate", c);
          },
          [c, &rng](const TabulatedDensity& t) -> double {
            const double total = tab_moment(t, t.beta, 0, c, kInf);
            if (!(total > 0.0)) throw DomainError("no tabulated mass above cutoff");
            double target = rng.uniform() * total;
            std::size_t i = 0;
            double a = 0, b = 0, pa = 0, pb = 0;
            for (; i + 1 < t.x.size(); ++i) {
              a = t.x[i];
              b = t.x[i + 1];
              if (b <= c) continue;
              const double slope = (t.density[i + 1] - t.density[i]) / (b - a);
              const double a2 = std::max(a, c);
              pa = t.density[i] + slope * (a2 - a);
              pb = t.density[i + 1];
              a = a2;
              const double mass = lin_exp_moment(a, b, pa, pb, t.beta, 0);
              if (target < mass || i + 2 == t.x.size()) break;
              target -= mass;
            }
            const double q = t.beta * (b - a);
            const double pmax = std::max(pa, pb);
            for (int it = 0; it < 10000000; ++it) {
              double s;
              bool ok;
              if (q > 1.0) {
                s = -std::log1p(rng.uniform() * std::expm1(-q)) / q;
                ok = rng.uniform() * pmax <= pa + (pb - pa) * s;
              } else {
                // linear density on [0,1] by inversion
                const double u = rng.uniform();
                if (std::abs(pb - pa) < 1e-14 * pmax) {
                  s = u;
                } else {
                  s = (-pa + std::sqrt(pa * pa + u * (pb * pb - pa * pa))) / (pb - pa);
                }
                ok = rng.uniform() <= std::exp(-q * s);
              }
              if (ok) return a + s * (b - a);
            }
            throw NumericError("tabulated rejection did not terminate", c);
          },
      },
      kind_);
}

LevyMeasure LevyMeasure::tilted(double eps) const {
  if (!(eps >= 0.0)) throw ValidationError("tilt must be >= 0");
  if (eps == 0.0) return *this;
  return std::visit(
      overloaded{
          [](const NoJumps&) { return LevyMeasure(); },
          [eps](const CompoundPoisson& m) {
            CompoundPoisson t = m;
            if (m.law == JumpLaw::dirac) {
              t.rate = m.rate * std::exp(-eps * m.param);
            } else {
              t.rate = m.rate * std::exp(-m.shape * std::log1p(eps / m.param));
              t.param = m.param + eps;
            }
            return LevyMeasure(t);
          },
          [eps](const TemperedStable& m) {
            return LevyMeasure(TemperedStable{m.alpha, m.k, m.beta + eps});
          },
          [eps](const TabulatedDensity& m) {
            TabulatedDensity t = m;
            t.beta += eps;
            return LevyMeasure(std::move(t));
          },
      },
      kind_);
}

double levy_integral_by_quadrature(const std::function<double(double)>& density, double lam) {
  // near 0 the density can overflow while the product tends to 0
  auto f = [&](double x) {
    const double v = std::expm1(-lam * x) * density(x);
    return std::isfinite(v) ? v : 0.0;
  };
  const auto head = quad::tanh_sinh(f, 0.0, 1.0, 1e-12);
  const auto tail = quad::exp_sinh(f, 1.0, 1e-12);
  return head.value + tail.value;
}

}  // namespace csbp
