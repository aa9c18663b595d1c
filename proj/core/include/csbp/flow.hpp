#pragma once

#include <memory>
#include <vector>

#include "csbp/mechanism.hpp"

namespace csbp {

struct FlowResult {
  double u = 0.0;
  double log_u = -kInf;
  double residual = 0.0;     // |time mismatch| of the defining integral equation
  bool conservative = false; // lambda = 0 on a non-explosive mechanism: u = 0 by convention
};

struct QuadratureReport {
  double value = 0.0;
  double error = 0.0;      // quadrature error estimate
  double remainder = 0.0;  // truncated tail beyond y* (not included in value)
  double cross_check = kNaN;
  bool explosive = true;
};

namespace detail {

// G(w) = int g(w') dw' on a uniform grid of the transformed coordinate w,
// anchored at w = 0, with an exact Gauss-Legendre correction between nodes
// and linear continuation outside the grid.
class PanelTable {
 public:
  enum class Side { explosion, extinction };

  PanelTable() = default;
  PanelTable(std::shared_ptr<const BranchingMechanism> mech, Side side);

  double y_of_w(double w) const;
  double log_y_of_w(double w) const;
  double w_of_y(double y) const;
  double w_of_log_y(double log_y) const;
  double g(double w) const;
  // phi(y) (explosion side) or varphi(y) (extinction side) given y and its
  // distance to rho, using a local expansion when y is within rounding of rho
  double rate(double y, double dist) const;
  double G(double w) const;
  double invert(double target) const;  // w with G(w) = target
  double w_min() const { return w0_; }
  double w_max() const { return w0_ + step_ * (nodes_.size() - 1); }
  double node_value(std::size_t j) const { return nodes_[j]; }

 private:
  std::shared_ptr<const BranchingMechanism> mech_;
  Side side_ = Side::explosion;
  double rho_ = kInf;
  double d1_ = 0.0, d2_ = 0.0;  // varphi'(rho), varphi''(rho) for the local expansion
  double w0_ = -700.0, step_ = 0.5;
  std::vector<double> nodes_;
  double g_lo_ = 0.0, g_hi_ = 0.0;
};

}  // namespace detail

// F(y) = int_0^y du / phi(u) on (0, rho) and the matching potential on the
// extinction side (rho, inf). Immutable after construction.
class CumulativeRate {
 public:
  explicit CumulativeRate(const BranchingMechanism& mech);

  const BranchingMechanism& mechanism() const { return *mech_; }
  bool explosive() const { return explosive_; }

  // int_0^y du/phi(u), +inf when not explosive (y > 0).
  double F(double y) const;
  double F_inverse(double v) const;
  // int_{y1}^{y2} du/phi(u) for 0 < y1, y2 < rho, optionally in log scale.
  double integral(double y1, double y2) const;
  double integral_log(double log_y1, double log_y2) const;
  // y with int_y^{y_ref} du/phi = v, on log scale: used to build speeds.
  double log_solve_below(double log_y_ref, double v) const;

  FlowResult solve_ut(double t, double lam) const;
  FlowResult solve_ut_log(double t, double log_lam) const;
  double survival_probability(double x, double t) const;

  QuadratureReport zeta_moment(double x, int n) const;
  QuadratureReport zeta_laplace(double x, double lam) const;

 private:
  double F_split(double y, double dist_to_rho) const;

  std::shared_ptr<const BranchingMechanism> mech_;
  bool explosive_ = false;
  double G0_ = -kInf;  // G at y = 0+ when explosive
  detail::PanelTable expl_;
  detail::PanelTable ext_;
  bool has_expl_ = false, has_ext_ = false;
};

double expected_truncated_integral(const BranchingMechanism& level_mech, double x, double h);
// M-started limit of the above (h -> 0): int_0^rho (e^{-l M} - e^{-rho M}) / phi(l) dl
double explosion_tail_bound(const BranchingMechanism& mech, double M);

}  // namespace csbp
