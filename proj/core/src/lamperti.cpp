#include "csbp/lamperti.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace csbp {

const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::active: return "active";
    case StopReason::done: return "done";
    case StopReason::big_level: return "big-level";
    case StopReason::clock_cap: return "clock-cap";
    case StopReason::hit_zero: return "hit-zero";
    default: return "horizon";
  }
}

const char* passage_exit_name(PassageExit e) {
  switch (e) {
    case PassageExit::reached: return "reached";
    case PassageExit::hit_zero_first: return "hit-zero-first";
    default: return "horizon";
  }
}

ClockAccumulator::ClockAccumulator(ClockSpec spec, double x0) : spec_(std::move(spec)), x_(x0) {
  if (!(x0 > 0.0)) throw DomainError("clock needs a positive start");
  passage_.assign(spec_.log_targets.size(), kInf);
  samples_.assign(spec_.sample_times.size(), kNaN);
  if (spec_.keep_breakpoints) bp_.emplace_back(0.0, x0);
  for (std::size_t k = 0; k < samples_.size(); ++k)
    if (spec_.sample_times[k] <= 0.0) samples_[k] = x0;
  if (spec_.window <= 0.0) window_clock_ = 0.0;
  check_level(x0, 0.0);
  if (active() && !pending()) stop(StopReason::done);
}

bool ClockAccumulator::pending() const {
  const bool any_request = !passage_.empty() || std::isfinite(spec_.log_M) ||
                           std::isfinite(spec_.window) || !samples_.empty();
  if (!any_request) return true;
  if (std::isfinite(spec_.log_M)) return true;
  for (double p : passage_)
    if (std::isinf(p)) return true;
  if (std::isfinite(spec_.window) && std::isnan(window_clock_)) return true;
  for (double v : samples_)
    if (std::isnan(v)) return true;
  return false;
}

double ClockAccumulator::clock_over(double xs, double d, double u) const {
  if (u == 0.0) return 0.0;
  if (d == 0.0) return u / xs;
  return std::log1p(d * u / xs) / d;
}

void ClockAccumulator::check_level(double x_now, double clock_now) {
  if (!(x_now > 0.0)) return;
  const double lx = std::log(x_now);
  for (std::size_t i = 0; i < passage_.size(); ++i)
    if (std::isinf(passage_[i]) && lx >= spec_.log_targets[i]) passage_[i] = clock_now;
  if (lx >= spec_.log_M) stop(StopReason::big_level);
}

bool ClockAccumulator::piece(double s, double h, double xs, double xe, double d, bool diffusive,
                             bool cross) {
  if (!active()) return false;
  if (diffusive) {
    for (std::size_t k = 0; k < samples_.size(); ++k) {
      const double t = spec_.sample_times[k];
      if (std::isnan(samples_[k]) && t > s && t <= s + h)
        samples_[k] = xs + (xe - xs) * (t - s) / h;
    }
    if (std::isfinite(spec_.window) && std::isnan(window_clock_) && spec_.window <= s + h) {
      const double f = (spec_.window - s) / h;
      const double xw = xs + f * (xe - xs);
      if (xw > 0.0 && !cross) window_clock_ = clock_ + 0.5 * f * h * (1.0 / xs + 1.0 / xw);
    }
    if (cross || !(xe > 0.0)) {
      tau_ = s + h;
      s_ = s + h;
      x_ = 0.0;
      if (spec_.keep_breakpoints) bp_.emplace_back(clock_, 0.0);
      stop(StopReason::hit_zero);
      return false;
    }
    const double incr = 0.5 * h * (1.0 / xs + 1.0 / xe);
    if (clock_ + incr > spec_.clock_cap) {
      clock_ = spec_.clock_cap;
      s_ = s + h;
      x_ = xe;
      stop(StopReason::clock_cap);
      return false;
    }
    if (xe != xs) disc_err_ += std::abs(incr - h * std::log(xe / xs) / (xe - xs));
    clock_ += incr;
    s_ = s + h;
    x_ = xe;
    if (spec_.keep_breakpoints) bp_.emplace_back(clock_, xe);
    check_level(xe, clock_);
    if (active() && !pending()) stop(StopReason::done);
    return active();
  }

  // linear piece X(u) = xs + d u, u in [0, h]
  enum Ev { zero, cap, target, big, window, sample };
  std::vector<std::tuple<double, int, std::size_t>> ev;
  if (d < 0.0) ev.emplace_back(xs / -d, zero, 0);
  if (std::isfinite(spec_.clock_cap)) {
    const double rem = spec_.clock_cap - clock_;
    double u;
    if (d == 0.0) {
      u = rem * xs;
    } else if (d * rem > 700.0) {
      u = kInf;
    } else {
      u = xs * std::expm1(d * rem) / d;
    }
    ev.emplace_back(u, cap, 0);
  }
  if (d > 0.0) {
    for (std::size_t i = 0; i < passage_.size(); ++i)
      if (std::isinf(passage_[i]))
        ev.emplace_back((std::exp(spec_.log_targets[i]) - xs) / d, target, i);
    if (std::isfinite(spec_.log_M)) ev.emplace_back((std::exp(spec_.log_M) - xs) / d, big, 0);
  }
  if (std::isfinite(spec_.window) && std::isnan(window_clock_))
    ev.emplace_back(spec_.window - s, window, 0);
  for (std::size_t k = 0; k < samples_.size(); ++k)
    if (std::isnan(samples_[k])) ev.emplace_back(spec_.sample_times[k] - s, sample, k);
  std::sort(ev.begin(), ev.end());

  const double clock0 = clock_;
  for (const auto& [u0, type, idx] : ev) {
    const double u = std::max(u0, 0.0);
    if (u > h) break;
    const double c = clock0 + clock_over(xs, d, u);
    const double xu = xs + d * u;
    switch (type) {
      case zero:
        tau_ = s + u;
        s_ = s + u;
        x_ = 0.0;
        clock_ = kInf;  // a linear approach to 0 takes infinite Lamperti time
        stop(StopReason::hit_zero);
        return false;
      case cap:
        clock_ = spec_.clock_cap;
        s_ = s + u;
        x_ = xu;
        if (spec_.keep_breakpoints) bp_.emplace_back(clock_, xu);
        stop(StopReason::clock_cap);
        return false;
      case target:
        passage_[idx] = c;
        break;
      case big:
        clock_ = c;
        s_ = s + u;
        x_ = xu;
        if (spec_.keep_breakpoints) bp_.emplace_back(c, xu);
        stop(StopReason::big_level);
        return false;
      case window:
        window_clock_ = c;
        break;
      default:
        samples_[idx] = xu;
        break;
    }
    if (!pending()) {
      clock_ = c;
      s_ = s + u;
      x_ = xu;
      if (spec_.keep_breakpoints) bp_.emplace_back(c, xu);
      stop(StopReason::done);
      return false;
    }
  }
  if (std::isinf(h)) {
    clock_ = kInf;
    s_ = kInf;
    x_ = xe;
    stop(StopReason::horizon);
    return false;
  }
  clock_ = clock0 + clock_over(xs, d, h);
  s_ = s + h;
  x_ = xe;
  if (spec_.keep_breakpoints) bp_.emplace_back(clock_, xe);
  return true;
}

bool ClockAccumulator::jump(double, double, double x_after) {
  if (!active()) return false;
  x_ = x_after;
  if (spec_.keep_breakpoints) bp_.emplace_back(clock_, x_after);
  check_level(x_after, clock_);
  if (active() && !pending()) stop(StopReason::done);
  return active();
}

void ClockAccumulator::finish() {
  if (active()) stop(StopReason::horizon);
}

std::vector<bool> ClockSet::active_mask() const {
  std::vector<bool> m;
  for (const auto& c : clocks_) m.push_back(c.active());
  return m;
}

void ClockSet::finish() {
  for (auto& c : clocks_) c.finish();
}

double CsbpPath::value_at(double t) const {
  if (breakpoints.empty() || t < 0.0) return kNaN;
  if (hit_zero && t >= zero_time) return 0.0;
  const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t,
                                   [](double v, const auto& p) { return v < p.first; });
  if (it == breakpoints.end()) return t == breakpoints.back().first ? breakpoints.back().second : kNaN;
  if (it == breakpoints.begin()) return kNaN;
  const auto& [a0, z0] = *std::prev(it);
  const auto& [a1, z1] = *it;
  if (!(z0 > 0.0) || !(z1 > 0.0) || a1 == a0) return z0;
  // linear X between knots makes Z exponential in Lamperti time
  return z0 * std::pow(z1 / z0, (t - a0) / (a1 - a0));
}

namespace {

// Feeds a recorded level path into `clock`; returns true when a zero was
// only localized to a grid step.
bool feed(const LevelPath& p, ClockAccumulator& clock) {
  for (std::size_t k = 0; k + 1 < p.t.size(); ++k) {
    const double h = p.t[k + 1] - p.t[k];
    const double xs = p.right[k], xe = p.left[k + 1];
    if (h > 0.0) {
      const bool cross = p.diffusive && !(xe > 0.0);
      if (!clock.piece(p.t[k], h, xs, xe, (xe - xs) / h, p.diffusive, cross))
        return p.diffusive && clock.hit_zero();
    }
    if (p.right[k + 1] != xe && !clock.jump(p.t[k + 1], xe, p.right[k + 1])) return false;
  }
  clock.finish();
  return false;
}

}  // namespace

CsbpPath lamperti_transform(const LevelPath& path, double horizon_clock,
                            const BranchingMechanism* mech, double M) {
  if (path.t.empty() || !(path.left.front() > 0.0)) throw DomainError("path must start at x0 > 0");
  ClockSpec spec;
  spec.clock_cap = horizon_clock;
  spec.keep_breakpoints = true;
  if (std::isfinite(M)) spec.log_M = std::log(M);
  ClockAccumulator clock(spec, path.left.front());
  CsbpPath out;
  out.level = path.n;
  out.zero_localized_to_step = feed(path, clock);
  out.breakpoints = clock.breakpoints();
  out.hit_zero = clock.hit_zero();
  if (out.hit_zero) out.zero_time = clock.clock();
  out.horizon_clock = horizon_clock;
  out.levy_end = clock.levy_time();
  out.x_end = clock.x();
  out.clock_error = clock.discretization_error();
  if (mech && clock.reason() == StopReason::big_level)
    out.exploded = std::isfinite(explosion_tail_bound(*mech, clock.x()));
  return out;
}

PassageRecord first_passage(const LevelPath& path, double y) {
  PassageRecord r;
  r.level = path.n;
  r.y = y;
  if (path.t.empty()) throw DomainError("empty path");
  if (y <= path.left.front()) {
    r.sigma = 0.0;
    r.exit = PassageExit::reached;
    return r;
  }
  ClockSpec spec;
  spec.log_targets = {std::log(y)};
  ClockAccumulator clock(spec, path.left.front());
  feed(path, clock);
  if (std::isfinite(clock.passage()[0])) {
    r.sigma = clock.passage()[0];
    r.exit = PassageExit::reached;
  } else {
    r.exit = clock.hit_zero() ? PassageExit::hit_zero_first : PassageExit::horizon;
  }
  return r;
}

ExplosionRecord explosion_functional(const LevelPath& path, const BranchingMechanism& mech,
                                     double M) {
  if (!(M > path.left.front())) throw DomainError("big level M must exceed x0");
  ClockSpec spec;
  spec.log_M = std::log(M);
  ClockAccumulator clock(spec, path.left.front());
  feed(path, clock);
  ExplosionRecord r;
  r.x_stop = clock.x();
  if (clock.hit_zero()) {
    r.tau_finite = true;
  } else if (clock.reason() == StopReason::big_level) {
    r.zeta_estimate = clock.clock();
    r.tail_bound = explosion_tail_bound(mech, clock.x());
  } else {
    r.censored = true;
    r.zeta_estimate = clock.clock();
  }
  return r;
}

KilledRecord killed_explosion_functional(const LevelPath& path, double e_draw, double h_n) {
  if (!(h_n > 0.0)) throw DomainError("h_n must be > 0");
  if (!(e_draw >= 0.0)) throw DomainError("exponential draw must be >= 0");
  KilledRecord r;
  const double w = e_draw / h_n;
  if (w == 0.0) return r;
  ClockSpec spec;
  spec.window = w;
  ClockAccumulator clock(spec, path.left.front());
  feed(path, clock);
  if (!std::isnan(clock.window_clock())) {
    r.value = clock.window_clock();
  } else if (!clock.hit_zero()) {
    r.censored = true;
  }
  return r;
}

}  // namespace csbp
