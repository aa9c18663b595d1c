#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "csbp/mechanism.hpp"
#include "csbp/rng.hpp"

namespace csbp {

enum class SmallJumpMode { compensate_mean, gaussian_approx };
enum class ZeroDetection { grid, bridge };

struct SimPolicy {
  double T = 1.0;          // Levy-time horizon (may be +inf when observers stop the run)
  double dt = 0.01;        // grid step of the continuous part
  double delta = 1e-4;     // small-jump cutoff (floor when eta > 0)
  double eta = 0.0;        // > 0: cutoff follows eta * (smallest active X)
  double bucket_ratio = 2.0;
  SmallJumpMode mode = SmallJumpMode::compensate_mean;
  ZeroDetection zero = ZeroDetection::bridge;
  std::uint64_t seed = 1;
  std::uint32_t replication = 0;
  double max_jumps = 1e8;

  void validate(const LevyMeasure& measure) const;
};

struct MarkedJump {
  double time = 0.0;
  double size = 0.0;
  double mark = 0.0;  // included at tilt eps iff mark <= e^{-eps size}
};

// One level of a simulated family, as knots: at t[k] the path moves from
// left[k] to right[k] (a jump, or nothing); between knots it is linear when
// `diffusive` is false and a grid sample of a diffusion otherwise.
struct LevelPath {
  double eps = 0.0;
  int n = -1;  // ladder index, -1 for the limit
  bool diffusive = false;
  std::vector<double> t, left, right;
};

struct CoupledFamilySample {
  std::vector<double> eps;  // decreasing; the last entry is 0 (limit)
  std::vector<int> index;
  double x0 = 1.0;
  double T = 0.0, dt = 0.0, delta = 0.0, sigma2 = 0.0;
  std::vector<double> drift;  // per level, valid for the fixed cutoff
  std::vector<double> times;  // shared knots
  std::vector<std::vector<double>> left, right;
  std::vector<MarkedJump> jumps;

  std::size_t levels() const { return eps.size(); }
  double value_at(std::size_t level, double t) const;
  LevelPath level_path(std::size_t level) const;
};

// What the engine reports per level and piece. `piece` returns false once
// the level is no longer needed.
class PieceVisitor {
 public:
  virtual ~PieceVisitor() = default;
  virtual bool piece(std::size_t level, double s, double dt, double x_start, double x_end,
                     double drift, bool diffusive, bool bridge_cross) = 0;
  virtual bool jump(std::size_t level, double s, double x_before, double x_after) = 0;
  virtual void proposal(double /*s*/, double /*size*/, double /*mark*/) {}
};

struct SimStats {
  std::uint64_t jumps = 0;
  std::uint64_t proposals = 0;
  std::uint64_t pieces = 0;
  double end_time = 0.0;
  double max_delta = 0.0;
};

// Event-driven simulation of the coupled family X^(eps_j) on shared jumps,
// marks and Brownian increments. Proposals come from pi tilted by the
// smallest active eps; a proposal of size x is kept at level eps iff
// mark <= e^{-(eps - eps*) x}.
class CoupledSimulator {
 public:
  // eps strictly decreasing, >= 0
  CoupledSimulator(const BranchingMechanism& base, std::vector<double> eps, SimPolicy policy);

  SimStats run(double x0, PieceVisitor& visitor, std::vector<bool> active = {},
               bool record_grid = false);

  const SimPolicy& policy() const { return policy_; }
  void set_replication(std::uint32_t r) { policy_.replication = r; }
  std::size_t levels() const { return eps_.size(); }
  double eps(std::size_t j) const { return eps_[j]; }
  // drift of level j with cutoff delta
  double level_drift(std::size_t j, double delta) const;
  double proposal_rate(std::size_t lowest_eps_level, double delta) const;

 private:
  struct Bucket {
    std::vector<double> drift;
    std::vector<double> sd;  // gaussian-approx extra standard deviation per unit sqrt(time)
    std::map<std::size_t, double> rate;  // proposal rate keyed by lowest active level
  };
  Bucket& bucket(int b);
  double bucket_delta(int b) const;
  int bucket_of(double min_x) const;

  BranchingMechanism base_;
  std::vector<double> eps_;
  std::vector<LevyMeasure> tilted_;
  SimPolicy policy_;
  double sigma_ = 0.0;
  std::map<int, Bucket> buckets_;
};

CoupledFamilySample simulate_coupled(const EsscherLadder& ladder, double x0,
                                     const SimPolicy& policy);

struct LaplaceEstimate {
  double estimate = kNaN;
  double std_error = kNaN;
  std::size_t count = 0;
};
LaplaceEstimate empirical_laplace(const std::vector<CoupledFamilySample>& samples,
                                  std::size_t level, double lambda, double t);

double exact_stable_increment(double alpha, double k, double dt, PhiloxStream& rng);

// 1/2 lambda^2 int_{x<=delta} x^2 pi_eps(dx): bound on the exponent change
// caused by replacing the jumps below delta with their mean.
double truncation_gap_bound(const BranchingMechanism& level_mech, double delta, double lambda);

}  // namespace csbp
