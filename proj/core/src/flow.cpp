#include "csbp/flow.hpp"

#include <algorithm>
#include <cmath>

namespace csbp {

namespace {

// 36.84 ~ 16 log(10): e^{-x y*} = 1e-16 at y* = 36.84 / x.
constexpr double kTruncExponent = 36.841361487904734;
constexpr double kNear = 1e-6;

// phi(rho - d) for the mechanism, accurate when d << rho.
double phi_below_rho(const BranchingMechanism& m, double rho, double y, double d, double d1,
                     double d2) {
  if (std::isfinite(rho) && d < kNear * rho) return d1 * d - 0.5 * d2 * d * d;
  return m.phi(y);
}

}  // namespace

namespace detail {

PanelTable::PanelTable(std::shared_ptr<const BranchingMechanism> mech, Side side)
    : mech_(std::move(mech)), side_(side), rho_(mech_->rho()) {
  if (std::isfinite(rho_)) {
    d1_ = mech_->varphi_prime(rho_);
    d2_ = mech_->varphi_second(rho_);
  }
  const std::size_t n = static_cast<std::size_t>(std::lround((-2.0 * w0_) / step_)) + 1;
  const std::size_t j0 = (n - 1) / 2;
  nodes_.assign(n, 0.0);
  auto gf = [this](double w) { return g(w); };
  for (std::size_t j = j0 + 1; j < n; ++j) {
    const double a = w0_ + step_ * (j - 1);
    nodes_[j] = nodes_[j - 1] + quad::gauss10(gf, a, a + step_);
  }
  for (std::size_t j = j0; j-- > 0;) {
    const double a = w0_ + step_ * j;
    nodes_[j] = nodes_[j + 1] - quad::gauss10(gf, a, a + step_);
  }
  for (double v : nodes_) {
    if (std::isnan(v)) throw NumericError("cumulative-rate table produced NaN", 0.0);
  }
  g_lo_ = g(w0_);
  g_hi_ = g(w_max());
}

double PanelTable::y_of_w(double w) const {
  if (side_ == Side::extinction) return rho_ + std::exp(w);
  if (!std::isfinite(rho_)) return std::exp(w);
  if (w < 0.0) {
    const double e = std::exp(w);
    return rho_ * e / (1.0 + e);
  }
  return rho_ / (1.0 + std::exp(-w));
}

double PanelTable::log_y_of_w(double w) const {
  if (side_ == Side::extinction) return std::log(rho_ + std::exp(w));
  if (!std::isfinite(rho_)) return w;
  if (w < 0.0) return w + std::log(rho_) - std::log1p(std::exp(w));
  return std::log(rho_) - std::log1p(std::exp(-w));
}

double PanelTable::w_of_y(double y) const {
  if (side_ == Side::extinction) return std::log(y - rho_);
  if (!std::isfinite(rho_)) return std::log(y);
  return std::log(y) - std::log(rho_ - y);
}

double PanelTable::w_of_log_y(double log_y) const {
  if (side_ == Side::extinction) return std::log(std::exp(log_y) - rho_);
  if (!std::isfinite(rho_)) return log_y;
  const double y = std::exp(log_y);
  return log_y - std::log(rho_) - std::log1p(-y / rho_);
}

double PanelTable::rate(double y, double dist) const {
  if (side_ == Side::explosion) return phi_below_rho(*mech_, rho_, y, dist, d1_, d2_);
  if (rho_ > 0.0 && dist < kNear * rho_) return d1_ * dist + 0.5 * d2_ * dist * dist;
  return mech_->varphi(y);
}

double PanelTable::g(double w) const {
  if (side_ == Side::extinction) {
    const double d = std::exp(w);
    return d / rate(rho_ + d, d);
  }
  if (!std::isfinite(rho_)) {
    const double y = std::exp(w);
    return y / mech_->phi(y);
  }
  double y, d;
  if (w < 0.0) {
    const double e = std::exp(w);
    y = rho_ * e / (1.0 + e);
    d = rho_ / (1.0 + e);
  } else {
    const double e = std::exp(-w);
    y = rho_ / (1.0 + e);
    d = rho_ * e / (1.0 + e);
  }
  return (y * d / rho_) / rate(y, d);
}

double PanelTable::G(double w) const {
  if (w <= w0_) return nodes_.front() + g_lo_ * (w - w0_);
  const double wm = w_max();
  if (w >= wm) return nodes_.back() + g_hi_ * (w - wm);
  const std::size_t j = std::min(static_cast<std::size_t>((w - w0_) / step_), nodes_.size() - 2);
  const double a = w0_ + step_ * j;
  return nodes_[j] + quad::gauss10([this](double v) { return g(v); }, a, w);
}

double PanelTable::invert(double target) const {
  if (target <= nodes_.front()) {
    return g_lo_ > 0.0 ? w0_ + (target - nodes_.front()) / g_lo_ : -kInf;
  }
  if (target >= nodes_.back()) {
    return g_hi_ > 0.0 ? w_max() + (target - nodes_.back()) / g_hi_ : kInf;
  }
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), target);
  const std::size_t j = static_cast<std::size_t>(it - nodes_.begin()) - 1;
  double lo = w0_ + step_ * j, hi = lo + step_;
  const double span = nodes_[j + 1] - nodes_[j];
  double w = span > 0.0 ? lo + step_ * (target - nodes_[j]) / span : 0.5 * (lo + hi);
  auto gf = [this](double v) { return g(v); };
  for (int it2 = 0; it2 < 100; ++it2) {
    const double val = nodes_[j] + quad::gauss10(gf, w0_ + step_ * j, w) - target;
    if (std::abs(val) <= 1e-15 * (1.0 + std::abs(target))) break;
    if (val > 0.0) {
      hi = w;
    } else {
      lo = w;
    }
    double next = w - val / g(w);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == w || hi - lo <= 1e-15 * (1.0 + std::abs(w))) break;
    w = next;
  }
  return w;
}

}  // namespace detail

using detail::PanelTable;

CumulativeRate::CumulativeRate(const BranchingMechanism& mech)
    : mech_(std::make_shared<const BranchingMechanism>(mech)) {
  const double rho = mech_->rho();
  has_expl_ = rho > 0.0;
  has_ext_ = std::isfinite(rho);
  if (has_expl_) {
    expl_ = PanelTable(mech_, PanelTable::Side::explosion);
    const double theta = std::isfinite(rho) ? 0.5 * rho : 1.0;
    explosive_ = mech_->explosion_test(theta).finite;
    if (explosive_) {
      const double w0 = expl_.w_min();
      const double g0 = expl_.g(w0), g1 = expl_.g(w0 + 0.5);
      const double kappa = (std::log(g1) - std::log(g0)) / 0.5;
      const double tail = kappa > 0.0 ? g0 / kappa : 0.0;
      G0_ = expl_.node_value(0) - tail;
    }
  }
  if (has_ext_) ext_ = PanelTable(mech_, PanelTable::Side::extinction);
}

double CumulativeRate::F(double y) const {
  if (!(y > 0.0)) return 0.0;
  if (!explosive_) return kInf;
  if (!(y < mech_->rho())) throw DomainError("F is defined on (0, rho)");
  return expl_.G(expl_.w_of_y(y)) - G0_;
}

double CumulativeRate::F_split(double y, double dist) const {
  if (!(y > 0.0)) return 0.0;
  const double rho = mech_->rho();
  if (!std::isfinite(rho) || dist > 0.5 * rho) return F(y);
  dist = std::max(dist, 1e-300);
  return expl_.G(std::log(rho - dist) - std::log(dist)) - G0_;
}

double CumulativeRate::F_inverse(double v) const {
  if (!(v > 0.0)) return 0.0;
  if (!explosive_) throw DomainError("F_inverse needs an explosive mechanism");
  return expl_.y_of_w(expl_.invert(G0_ + v));
}

double CumulativeRate::integral(double y1, double y2) const {
  if (!has_expl_) throw DomainError("no explosion side (rho = 0)");
  return expl_.G(expl_.w_of_y(y2)) - expl_.G(expl_.w_of_y(y1));
}

double CumulativeRate::integral_log(double log_y1, double log_y2) const {
  if (!has_expl_) throw DomainError("no explosion side (rho = 0)");
  return expl_.G(expl_.w_of_log_y(log_y2)) - expl_.G(expl_.w_of_log_y(log_y1));
}

double CumulativeRate::log_solve_below(double log_y_ref, double v) const {
  if (!has_expl_) throw DomainError("no explosion side (rho = 0)");
  const double target = expl_.G(expl_.w_of_log_y(log_y_ref)) - v;
  return expl_.log_y_of_w(expl_.invert(target));
}

FlowResult CumulativeRate::solve_ut(double t, double lam) const {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("flow time must be finite and >= 0");
  if (!(lam >= 0.0)) throw DomainError("flow needs lambda >= 0");
  FlowResult r;
  const double rho = mech_->rho();
  if (t == 0.0) {
    r.u = lam;
    r.log_u = std::log(lam);
    return r;
  }
  if (lam == 0.0) {
    if (!has_expl_ || !explosive_) {
      r.conservative = true;
      return r;
    }
    const double w = expl_.invert(G0_ + t);
    r.u = expl_.y_of_w(w);
    r.log_u = expl_.log_y_of_w(w);
    r.residual = std::abs(expl_.G(w) - G0_ - t);
    return r;
  }
  if (lam < rho) return solve_ut_log(t, std::log(lam));
  if (lam == rho) {
    r.u = rho;
    r.log_u = std::log(rho);
    return r;
  }
  const double wl = ext_.w_of_y(lam);
  const double target = ext_.G(wl) - t;
  const double w = ext_.invert(target);
  r.u = ext_.y_of_w(w);
  r.log_u = std::log(r.u);
  r.residual = std::abs(ext_.G(wl) - ext_.G(w) - t);
  return r;
}

FlowResult CumulativeRate::solve_ut_log(double t, double log_lam) const {
  if (log_lam == -kInf) return solve_ut(t, 0.0);
  const double rho = mech_->rho();
  if (!(log_lam < std::log(rho)) || t == 0.0) return solve_ut(t, std::exp(log_lam));
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("flow time must be finite and >= 0");
  FlowResult r;
  const double wl = expl_.w_of_log_y(log_lam);
  const double gl = expl_.G(wl);
  const double w = expl_.invert(gl + t);
  r.log_u = expl_.log_y_of_w(w);
  r.u = expl_.y_of_w(w);
  r.residual = std::abs(expl_.G(w) - gl - t);
  return r;
}

double CumulativeRate::survival_probability(double x, double t) const {
  if (!(x > 0.0)) throw DomainError("initial mass must be > 0");
  return std::exp(-x * solve_ut(t, 0.0).u);
}

namespace {

// int_0^rho (e^{-l x} - e^{-rho x}) / phi(l) dl
Integral mean_alt_form(const BranchingMechanism& m, double x) {
  const double rho = m.rho();
  if (std::isfinite(rho)) {
    const double d1 = m.varphi_prime(rho), d2 = m.varphi_second(rho);
    auto f = [&](double l, double lc) {
      const double d = l > 0.5 * rho ? std::abs(lc) : rho - l;
      if (!(d > 0.0)) return 1.0 / d1 * x * std::exp(-rho * x);
      const double num = std::exp(-rho * x) * std::expm1(d * x);
      return num / phi_below_rho(m, rho, l, d, d1, d2);
    };
    return quad::tanh_sinh(f, 0.0, rho, 1e-12);
  }
  const double U = kTruncExponent / x;
  auto f = [&](double l) { return l > 0.0 ? std::exp(-l * x) / m.phi(l) : 0.0; };
  auto a = quad::tanh_sinh(f, 0.0, U, 1e-12);
  auto b = quad::exp_sinh([&](double s) { return f(U + s); }, 0.0, 1e-12);
  return {a.value + b.value, a.error + b.error};
}

}  // namespace

QuadratureReport CumulativeRate::zeta_moment(double x, int n) const {
  if (!(x > 0.0)) throw DomainError("initial mass must be > 0");
  if (n < 0) throw DomainError("moment order must be >= 0");
  QuadratureReport r;
  r.explosive = explosive_;
  if (!explosive_) return r;
  const double rho = mech_->rho();
  if (n == 0) {
    r.value = std::isfinite(rho) ? -std::expm1(-rho * x) : 1.0;
    return r;
  }
  const double U = std::min(rho, kTruncExponent / x);
  auto f = [&](double y, double yc) {
    const double dist = (y > 0.5 * U && U == rho) ? std::abs(yc) : rho - y;
    return x * std::pow(F_split(y, dist), n) * std::exp(-x * y);
  };
  const auto main = quad::tanh_sinh(f, 0.0, U, 1e-13);
  r.value = main.value;
  r.error = main.error;
  if (U < rho) {
    if (std::isfinite(rho)) {
      auto g = [&](double y, double yc) {
        const double dist = y > 0.5 * (U + rho) ? std::abs(yc) : rho - y;
        return x * std::pow(F_split(y, dist), n) * std::exp(-x * y);
      };
      r.remainder = quad::tanh_sinh(g, U, rho, 1e-10).value;
    } else {
      r.remainder = quad::exp_sinh(
                        [&](double s) { return x * std::pow(F(U + s), n) * std::exp(-x * (U + s)); },
                        0.0, 1e-10)
                        .value;
    }
  }
  if (n == 1) {
    const auto alt = mean_alt_form(*mech_, x);
    r.cross_check = alt.value;
    const double total = r.value + r.remainder;
    if (std::abs(alt.value - total) > 1e-6 * (1.0 + std::abs(alt.value)))
      throw NumericError("zeta mean: the two quadrature forms disagree",
                         std::abs(alt.value - total));
  }
  return r;
}

QuadratureReport CumulativeRate::zeta_laplace(double x, double lam) const {
  if (!(x > 0.0)) throw DomainError("initial mass must be > 0");
  if (!(lam >= 0.0)) throw DomainError("Laplace argument must be >= 0");
  QuadratureReport r;
  r.explosive = explosive_;
  if (!explosive_) return r;
  const double rho = mech_->rho();
  if (lam == 0.0) {
    r.value = std::isfinite(rho) ? -std::expm1(-rho * x) : 1.0;
    return r;
  }
  const double U = std::min(rho, kTruncExponent / x);
  auto f = [&](double y, double yc) {
    const double dist = (y > 0.5 * U && U == rho) ? std::abs(yc) : rho - y;
    return x * std::exp(-lam * F_split(y, dist) - x * y);
  };
  const auto main = quad::tanh_sinh(f, 0.0, U, 1e-13);
  r.value = main.value;
  r.error = main.error;
  if (U < rho) {
    if (std::isfinite(rho)) {
      auto g = [&](double y, double yc) {
        const double dist = y > 0.5 * (U + rho) ? std::abs(yc) : rho - y;
        return x * std::exp(-lam * F_split(y, dist) - x * y);
      };
      r.remainder = quad::tanh_sinh(g, U, rho, 1e-10).value;
    } else {
      r.remainder =
          quad::exp_sinh([&](double s) { return x * std::exp(-lam * F(U + s) - x * (U + s)); }, 0.0,
                         1e-10)
              .value;
    }
  }
  return r;
}

double expected_truncated_integral(const BranchingMechanism& m, double x, double h) {
  if (!(h > 0.0)) throw DomainError("killing rate h must be > 0");
  if (!(x > 0.0)) throw DomainError("initial mass must be > 0");
  const double rho = m.rho();
  if (!(rho > 0.0)) throw DomainError("level mechanism needs rho > 0");
  if (std::isfinite(rho)) {
    const double e_psi = std::exp(-m.psi_inverse(h) * x);
    auto f = [&](double l) { return (std::exp(-l * x) - e_psi) / (h + m.phi(l)); };
    return quad::tanh_sinh(f, 0.0, rho, 1e-12).value;
  }
  const double U = kTruncExponent / x;
  auto f = [&](double l) { return std::exp(-l * x) / (h + m.phi(l)); };
  const double a = quad::tanh_sinh(f, 0.0, U, 1e-12).value;
  const double b = quad::exp_sinh([&](double s) { return f(U + s); }, 0.0, 1e-12).value;
  return a + b;
}

double explosion_tail_bound(const BranchingMechanism& mech, double M) {
  if (!(M > 0.0)) throw DomainError("level M must be > 0");
  const double rho = mech.rho();
  if (!(rho > 0.0)) return 0.0;
  if (!mech.explosion_test(std::isfinite(rho) ? 0.5 * rho : 1.0).finite) return kInf;
  return mean_alt_form(mech, M).value;
}

}  // namespace csbp
