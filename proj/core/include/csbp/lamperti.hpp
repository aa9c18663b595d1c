#pragma once

#include <vector>

#include "csbp/flow.hpp"
#include "csbp/pathsim.hpp"

namespace csbp {

enum class StopReason { active, done, big_level, clock_cap, hit_zero, horizon };
const char* stop_reason_name(StopReason r);

// What one level's clock should watch for.
struct ClockSpec {
  std::vector<double> log_targets;   // passage levels (log scale), any order
  double log_M = kInf;               // stop once X >= M
  double window = kInf;              // Levy-time window
  double clock_cap = kInf;           // stop once the clock passes this
  std::vector<double> sample_times;  // Levy times at which X is recorded
  bool keep_breakpoints = false;
};

// Additive clock A(s) = int_0^s du / X_u fed piece by piece: exact log
// primitive on linear pieces, trapezoid on diffusive grid steps.
class ClockAccumulator {
 public:
  ClockAccumulator() = default;
  ClockAccumulator(ClockSpec spec, double x0);

  bool piece(double s, double dt, double x_start, double x_end, double drift, bool diffusive,
             bool bridge_cross);
  bool jump(double s, double x_before, double x_after);
  void finish();  // marks a still-pending clock as censored at the horizon

  bool active() const { return reason_ == StopReason::active; }
  StopReason reason() const { return reason_; }
  double clock() const { return clock_; }
  double levy_time() const { return s_; }
  double x() const { return x_; }
  bool hit_zero() const { return reason_ == StopReason::hit_zero; }
  double tau() const { return tau_; }
  // clock at first passage of each target (same order as the spec), +inf if not reached
  const std::vector<double>& passage() const { return passage_; }
  double window_clock() const { return window_clock_; }
  const std::vector<double>& samples() const { return samples_; }
  const std::vector<std::pair<double, double>>& breakpoints() const { return bp_; }
  double discretization_error() const { return disc_err_; }

 private:
  bool pending() const;
  double clock_over(double xs, double d, double u) const;
  void stop(StopReason r) { reason_ = r; }
  void check_level(double x_now, double clock_now);

  ClockSpec spec_;
  double clock_ = 0.0, s_ = 0.0, x_ = 0.0, tau_ = kInf;
  double window_clock_ = kNaN;
  double disc_err_ = 0.0;
  std::vector<double> passage_, samples_;
  std::vector<std::pair<double, double>> bp_;
  StopReason reason_ = StopReason::active;
};

// Feeds engine pieces into one ClockAccumulator per level.
class ClockSet final : public PieceVisitor {
 public:
  explicit ClockSet(std::vector<ClockAccumulator> clocks) : clocks_(std::move(clocks)) {}
  bool piece(std::size_t level, double s, double dt, double x_start, double x_end, double drift,
             bool diffusive, bool bridge_cross) override {
    return clocks_[level].piece(s, dt, x_start, x_end, drift, diffusive, bridge_cross);
  }
  bool jump(std::size_t level, double s, double x_before, double x_after) override {
    return clocks_[level].jump(s, x_before, x_after);
  }
  std::vector<bool> active_mask() const;
  void finish();
  ClockAccumulator& operator[](std::size_t j) { return clocks_[j]; }
  const ClockAccumulator& operator[](std::size_t j) const { return clocks_[j]; }
  std::size_t size() const { return clocks_.size(); }

 private:
  std::vector<ClockAccumulator> clocks_;
};

struct CsbpPath {
  int level = -1;
  std::vector<std::pair<double, double>> breakpoints;  // (t, Z_t), Z right-continuous at jumps
  bool hit_zero = false;
  double zero_time = kInf;  // Lamperti time of absorption at 0
  bool exploded = false;
  bool zero_localized_to_step = false;  // grid detection on a diffusive path
  double horizon_clock = kInf;
  double levy_end = 0.0;  // Levy time reached
  double x_end = 0.0;
  double clock_error = 0.0;

  double value_at(double t) const;  // NaN beyond the covered range
};

enum class PassageExit { reached, hit_zero_first, horizon };
const char* passage_exit_name(PassageExit e);

struct PassageRecord {
  int level = -1;
  double y = 0.0;
  double sigma = kInf;
  PassageExit exit = PassageExit::horizon;
};

struct ExplosionRecord {
  double zeta_estimate = 0.0;
  double tail_bound = kNaN;
  bool tau_finite = false;
  bool censored = false;
  double x_stop = kNaN;
};

struct KilledRecord {
  double value = 0.0;
  bool censored = false;
};

// `mech` (optional) lets the transform flag explosion via the analytic tail
// bound once X has passed `M`.
CsbpPath lamperti_transform(const LevelPath& path, double horizon_clock = kInf,
                            const BranchingMechanism* mech = nullptr, double M = kInf);
PassageRecord first_passage(const LevelPath& path, double y);
ExplosionRecord explosion_functional(const LevelPath& path, const BranchingMechanism& mech,
                                     double M);
KilledRecord killed_explosion_functional(const LevelPath& path, double e_draw, double h_n);

}  // namespace csbp
