#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "csbp/rng.hpp"

namespace csbp {

enum class JumpLaw { exponential, gamma, dirac };

struct NoJumps {};

// rate * law(dx). For exponential/gamma `param` is the inverse scale mu and
// `shape` the gamma shape; for dirac `param` is the atom location.
struct CompoundPoisson {
  double rate = 0.0;
  JumpLaw law = JumpLaw::exponential;
  double shape = 1.0;
  double param = 1.0;
};

// pi(dx) = k alpha / Gamma(1 - alpha) x^{-1-alpha} e^{-beta x} dx.
// beta = 0 is the stable measure with int (e^{-lx} - 1) pi = -k l^alpha.
struct TemperedStable {
  double alpha = 0.5;
  double k = 1.0;
  double beta = 0.0;
};

// Piecewise-linear density on the grid, zero outside, times e^{-beta x}.
struct TabulatedDensity {
  std::vector<double> x;
  std::vector<double> density;
  double beta = 0.0;
};

class LevyMeasure {
 public:
  using Kind = std::variant<NoJumps, CompoundPoisson, TemperedStable, TabulatedDensity>;

  LevyMeasure() = default;
  explicit LevyMeasure(Kind kind);

  static LevyMeasure none() { return LevyMeasure(); }
  static LevyMeasure compound_poisson(double rate, JumpLaw law, double shape, double param);
  static LevyMeasure stable(double alpha, double k);
  static LevyMeasure tempered_stable(double alpha, double k, double beta);
  static LevyMeasure tabulated(std::vector<double> x, std::vector<double> density);

  const Kind& kind() const { return kind_; }
  std::string kind_name() const;
  bool is_none() const { return std::holds_alternative<NoJumps>(kind_); }
  bool finite_activity() const;
  double total_mass() const;

  // int (e^{-l x} - 1) pi(dx) and its first two l-derivatives.
  double laplace_integral(double lam) const;
  double laplace_integral_d1(double lam) const;
  double laplace_integral_d2(double lam) const;

  double density(double x) const;  // 0 for atoms
  double mean_below(double c) const;           // int_{x<c} x pi(dx)
  double second_moment_below(double c) const;  // int_{x<c} x^2 pi(dx)
  double tail_mass(double c) const;            // pi((c, inf))
  // One draw from pi restricted to (c, inf), normalized.
  double sample_above(double c, PhiloxStream& rng) const;

  LevyMeasure tilted(double eps) const;

 private:
  void validate() const;
  Kind kind_ = NoJumps{};
};

// int_0^inf (e^{-l x} - 1) f(x) dx for a user density, by quadrature split
// at x = 1. Independent of the closed forms; handy as a test oracle.
double levy_integral_by_quadrature(const std::function<double(double)>& density, double lam);

}  // namespace csbp
