#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace csbp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Error hierarchy. The CLI maps validation/domain errors to exit status 1
// and numeric failures to exit status 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  NumericError(const std::string& what, double achieved)
      : Error(what + " (achieved error " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

// Tolerances shared by the numerical routines. Every routine takes one of
// these by const reference with a defaulted argument so callers can
// tighten or relax a single call.
struct NumericPolicy {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  double quad_tol = 1e-12;       // requested relative quadrature accuracy
  double root_tol = 1e-12;       // |varphi(root)| target
  double bracket_limit = 1e12;   // give up expanding root brackets past this
  int max_shells = 60;           // dyadic shells in the singular-integral test
  double shell_ratio_cut = 0.999;  // shell ratio at or above this => divergent
};

inline const NumericPolicy& default_policy() {
  static const NumericPolicy p{};
  return p;
}

struct Integral {
  double value = 0.0;
  double error = 0.0;
};

namespace quad {

// Adaptive Gauss-Kronrod on a finite (or semi-infinite) interval.
template <class F>
Integral gauss_kronrod(F&& f, double a, double b, double rel_tol = 1e-12,
                       unsigned max_depth = 6) {
  Integral out;
  if (a == b) return out;
  out.value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, a, b, max_depth, rel_tol, &out.error);
  return out;
}

// Fixed 10-point Gauss-Legendre; used for short panels of smooth integrands.
template <class F>
double gauss10(F&& f, double a, double b) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss<double, 10>::integrate(f, a, b);
}

// Double-exponential rule for integrands with endpoint singularities.
template <class F>
Integral tanh_sinh(F&& f, double a, double b, double rel_tol = 1e-12) {
  thread_local boost::math::quadrature::tanh_sinh<double> integrator(15);
  Integral out;
  if (a == b) return out;
  double l1 = 0.0;
  out.value = integrator.integrate(f, a, b, rel_tol, &out.error, &l1);
  out.error *= std::max(1.0, std::abs(out.value));
  return out;
}

// Semi-infinite [a, inf) with exponentially decaying integrand.
template <class F>
Integral exp_sinh(F&& f, double a, double rel_tol = 1e-12) {
  thread_local boost::math::quadrature::exp_sinh<double> integrator(12);
  Integral out;
  double l1 = 0.0;
  out.value = integrator.integrate(f, a, kInf, rel_tol, &out.error, &l1);
  out.error *= std::max(1.0, std::abs(out.value));
  return out;
}

}  // namespace quad

// Plain bisection for a monotone predicate change on [lo, hi]; returns the
// midpoint of the final bracket. `below(x)` must be true at lo, false at hi.
template <class Pred>
double bisect_boundary(Pred&& below, double lo, double hi, int max_iter = 200,
                       double rel_width = 1e-15) {
  for (int i = 0; i < max_iter; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (below(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= rel_width * std::max(std::abs(lo), std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace csbp
