#include "csbp/pathsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace csbp {

void SimPolicy::validate(const LevyMeasure& measure) const {
  if (!(T > 0.0)) throw ValidationError("simulation horizon T must be > 0");
  if (!(dt > 0.0)) throw ValidationError("grid step dt must be > 0");
  if (!(delta >= 0.0)) throw ValidationError("cutoff delta must be >= 0");
  if (!(eta >= 0.0)) throw ValidationError("relative cutoff eta must be >= 0");
  if (!(bucket_ratio > 1.0)) throw ValidationError("bucket ratio must be > 1");
  if (delta == 0.0 && !measure.finite_activity())
    throw ValidationError("delta = 0 is only allowed for finite-activity measures");
}

CoupledSimulator::CoupledSimulator(const BranchingMechanism& base, std::vector<double> eps,
                                   SimPolicy policy)
    : base_(base), eps_(std::move(eps)), policy_(policy), sigma_(std::sqrt(base.sigma2())) {
  if (eps_.empty()) throw ValidationError("no levels to simulate");
  for (std::size_t j = 0; j < eps_.size(); ++j) {
    if (!(eps_[j] >= 0.0)) throw ValidationError("level tilts must be >= 0");
    if (j > 0 && !(eps_[j] < eps_[j - 1])) throw ValidationError("level tilts must decrease");
    tilted_.push_back(base_.measure().tilted(eps_[j]));
  }
  policy_.validate(base_.measure());
  if (std::isfinite(policy_.T) && policy_.eta == 0.0) {
    const double expected = proposal_rate(eps_.size() - 1, policy_.delta) * policy_.T;
    if (expected > policy_.max_jumps) {
      std::ostringstream os;
      os << "expected " << expected << " jumps above delta = " << policy_.delta
         << " exceeds the limit " << policy_.max_jumps << "; raise delta";
      throw ValidationError(os.str());
    }
  }
}

double CoupledSimulator::level_drift(std::size_t j, double delta) const {
  return -(base_.net_drift() + eps_[j] * base_.sigma2()) + tilted_[j].mean_below(delta);
}

double CoupledSimulator::proposal_rate(std::size_t lowest_eps_level, double delta) const {
  if (base_.measure().is_none()) return 0.0;
  return tilted_[lowest_eps_level].tail_mass(delta);
}

double CoupledSimulator::bucket_delta(int b) const {
  return policy_.delta * std::pow(policy_.bucket_ratio, b);
}

int CoupledSimulator::bucket_of(double min_x) const {
  if (policy_.eta == 0.0 || !(min_x > 0.0)) return 0;
  const double r = policy_.eta * min_x / policy_.delta;
  if (r <= 1.0) return 0;
  return static_cast<int>(std::floor(std::log(r) / std::log(policy_.bucket_ratio)));
}

CoupledSimulator::Bucket& CoupledSimulator::bucket(int b) {
  auto it = buckets_.find(b);
  if (it != buckets_.end()) return it->second;
  Bucket bk;
  const double d = bucket_delta(b);
  for (std::size_t j = 0; j < eps_.size(); ++j) {
    double v = level_drift(j, d);
    if (j > 0) v = std::max(v, bk.drift.back());
    bk.drift.push_back(v);
    bk.sd.push_back(policy_.mode == SmallJumpMode::gaussian_approx
                        ? std::sqrt(tilted_[j].second_moment_below(d))
                        : 0.0);
  }
  return buckets_.emplace(b, std::move(bk)).first->second;
}

SimStats CoupledSimulator::run(double x0, PieceVisitor& visitor, std::vector<bool> active,
                               bool record_grid) {
  if (!(x0 > 0.0)) throw ValidationError("x0 must be > 0");
  const std::size_t L = eps_.size();
  if (active.empty()) active.assign(L, true);
  if (active.size() != L) throw ValidationError("active mask size mismatch");

  PhiloxStream jumps(policy_.seed, policy_.replication, StreamRole::jumps);
  PhiloxStream marks(policy_.seed, policy_.replication, StreamRole::marks);
  PhiloxStream gauss(policy_.seed, policy_.replication, StreamRole::gaussian);
  PhiloxStream aux(policy_.seed, policy_.replication, StreamRole::aux);

  const bool gauss_mode = policy_.mode == SmallJumpMode::gaussian_approx;
  const bool diffusive = sigma_ > 0.0 || gauss_mode;
  const bool use_grid = diffusive || record_grid;
  const bool bridge = diffusive && policy_.zero == ZeroDetection::bridge;

  std::vector<double> x(L, x0);
  SimStats st;
  double s = 0.0;
  std::uint64_t gk = 0;

  auto any_active = [&] { return std::find(active.begin(), active.end(), true) != active.end(); };

  while (any_active() && s < policy_.T) {
    std::size_t jmax = 0, jmin = L;
    double min_x = kInf;
    for (std::size_t j = 0; j < L; ++j) {
      if (!active[j]) continue;
      if (jmin == L) jmin = j;
      jmax = j;
      min_x = std::min(min_x, x[j]);
    }
    const int b = bucket_of(min_x);
    Bucket& bk = bucket(b);
    const double delta = bucket_delta(b);
    st.max_delta = std::max(st.max_delta, delta);
    auto rit = bk.rate.find(jmax);
    if (rit == bk.rate.end()) rit = bk.rate.emplace(jmax, proposal_rate(jmax, delta)).first;
    const double rate = rit->second;

    const double wait = rate > 0.0 ? jumps.exponential() / rate : kInf;
    double end = std::min(s + wait, policy_.T);
    bool jump_now = s + wait <= policy_.T;
    bool on_grid = false;
    if (use_grid) {
      const double g = static_cast<double>(gk + 1) * policy_.dt;
      if (g <= end) {
        end = g;
        jump_now = false;
        on_grid = true;
      }
    }
    if (policy_.eta > 0.0 && !use_grid) {
      // refresh the cutoff when the lowest active level enters the next bucket
      const double thr = bucket_delta(b + 1) / policy_.eta;
      const double d = bk.drift[jmin];
      if (d > 0.0 && x[jmin] == min_x) {
        const double tc = s + (thr - min_x) / d;
        if (tc < end) {
          end = tc;
          jump_now = false;
        }
      }
    }
    const double h = end - s;
    double zn = 0.0, ub = 1.0;
    if (diffusive && std::isfinite(h)) zn = gauss.normal();
    if (bridge && std::isfinite(h)) ub = aux.uniform();

    for (std::size_t j = 0; j < L; ++j) {
      if (!active[j]) continue;
      const double d = bk.drift[j];
      double xe;
      bool cross = false;
      if (std::isfinite(h)) {
        const double sd = std::sqrt(sigma_ * sigma_ + bk.sd[j] * bk.sd[j]);
        xe = x[j] + d * h + sd * std::sqrt(h) * zn;
        if (diffusive) {
          if (xe <= 0.0 || x[j] <= 0.0) {
            cross = true;
          } else if (bridge) {
            cross = ub < std::exp(-2.0 * x[j] * xe / (sd * sd * h));
          }
        }
      } else {
        xe = d > 0.0 ? kInf : (d < 0.0 ? -kInf : x[j]);
      }
      if (!visitor.piece(j, s, h, x[j], xe, d, diffusive, cross)) active[j] = false;
      x[j] = xe;
    }
    ++st.pieces;
    if (!std::isfinite(h)) {
      s = kInf;
      break;
    }
    s = end;
    if (on_grid) ++gk;

    if (jump_now) {
      const double size = tilted_[jmax].sample_above(delta, jumps);
      const double mark = marks.uniform();
      ++st.proposals;
      visitor.proposal(s, size, mark);
      bool kept = false;
      for (std::size_t j = 0; j < L; ++j) {
        if (!active[j]) continue;
        if (j != jmax && !(mark <= std::exp(-(eps_[j] - eps_[jmax]) * size))) continue;
        kept = true;
        const double xa = x[j] + size;
        if (!visitor.jump(j, s, x[j], xa)) active[j] = false;
        x[j] = xa;
      }
      if (kept) ++st.jumps;
      if (static_cast<double>(st.proposals) > policy_.max_jumps) {
        std::ostringstream os;
        os << "more than " << policy_.max_jumps << " jumps in one replication; raise delta or eta";
        throw ValidationError(os.str());
      }
    }
  }
  st.end_time = s;
  return st;
}

namespace {

class Recorder final : public PieceVisitor {
 public:
  explicit Recorder(CoupledFamilySample& out) : out_(out) {}

  bool piece(std::size_t level, double s, double dt, double, double x_end, double, bool,
             bool) override {
    if (level == 0) out_.times.push_back(s + dt);
    out_.left[level].push_back(x_end);
    out_.right[level].push_back(x_end);
    return true;
  }
  bool jump(std::size_t level, double, double, double x_after) override {
    out_.right[level].back() = x_after;
    return true;
  }
  void proposal(double s, double size, double mark) override {
    out_.jumps.push_back({s, size, mark});
  }

 private:
  CoupledFamilySample& out_;
};

}  // namespace

CoupledFamilySample simulate_coupled(const EsscherLadder& ladder, double x0,
                                     const SimPolicy& policy) {
  if (policy.eta != 0.0) throw ValidationError("recorded families use a fixed cutoff (eta = 0)");
  if (!std::isfinite(policy.T)) throw ValidationError("recorded families need a finite horizon");
  CoupledFamilySample out;
  out.eps = ladder.eps();
  for (std::size_t i = 0; i < ladder.size(); ++i) out.index.push_back(ladder.index(i));
  if (out.eps.back() > 0.0) {
    out.eps.push_back(0.0);
    out.index.push_back(-1);
  } else {
    out.index.back() = -1;
  }
  out.x0 = x0;
  out.T = policy.T;
  out.dt = policy.dt;
  out.delta = policy.delta;
  out.sigma2 = ladder.base().sigma2();
  CoupledSimulator sim(ladder.base(), out.eps, policy);
  for (std::size_t j = 0; j < out.eps.size(); ++j) out.drift.push_back(sim.level_drift(j, policy.delta));
  const std::size_t L = out.eps.size();
  out.left.assign(L, {});
  out.right.assign(L, {});
  out.times.push_back(0.0);
  for (std::size_t j = 0; j < L; ++j) {
    out.left[j].push_back(x0);
    out.right[j].push_back(x0);
  }
  Recorder rec(out);
  sim.run(x0, rec, {}, true);
  return out;
}

double CoupledFamilySample::value_at(std::size_t level, double t) const {
  if (level >= eps.size()) throw DomainError("level out of range");
  if (t < 0.0 || t > T * (1 + 1e-12)) throw DomainError("time outside the simulated horizon");
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
  const auto& R = right[level];
  if (k + 1 >= times.size() || times[k] == t) return R[k];
  const double f = (t - times[k]) / (times[k + 1] - times[k]);
  return R[k] + f * (left[level][k + 1] - R[k]);
}

LevelPath CoupledFamilySample::level_path(std::size_t level) const {
  if (level >= eps.size()) throw DomainError("level out of range");
  LevelPath p;
  p.eps = eps[level];
  p.n = index[level];
  p.diffusive = sigma2 > 0.0;
  p.t = times;
  p.left = left[level];
  p.right = right[level];
  return p;
}

LaplaceEstimate empirical_laplace(const std::vector<CoupledFamilySample>& samples,
                                  std::size_t level, double lambda, double t) {
  if (!(lambda >= 0.0)) throw DomainError("lambda must be >= 0");
  LaplaceEstimate e;
  double sum = 0.0, sum2 = 0.0;
  for (const auto& s : samples) {
    const double v = std::exp(-lambda * (s.value_at(level, t) - s.x0));
    sum += v;
    sum2 += v * v;
    ++e.count;
  }
  if (e.count == 0) return e;
  const double n = static_cast<double>(e.count);
  e.estimate = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum2 - n * e.estimate * e.estimate) / (n - 1)) : 0.0;
  e.std_error = std::sqrt(var / n);
  return e;
}

double exact_stable_increment(double alpha, double k, double dt, PhiloxStream& rng) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
  if (!(k > 0.0) || !(dt > 0.0)) throw ValidationError("k and dt must be > 0");
  // Kanter's representation
  const double u = std::numbers::pi * rng.uniform();
  const double e = rng.exponential();
  const double a = std::sin(alpha * u) / std::pow(std::sin(u), 1.0 / alpha);
  const double b = std::pow(std::sin((1.0 - alpha) * u) / e, (1.0 - alpha) / alpha);
  return std::pow(k * dt, 1.0 / alpha) * a * b;
}

double truncation_gap_bound(const BranchingMechanism& level_mech, double delta, double lambda) {
  return 0.5 * lambda * lambda * level_mech.measure().second_moment_below(delta);
}

}  // namespace csbp
