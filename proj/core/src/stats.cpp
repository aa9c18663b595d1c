#include "csbp/stats.hpp"

#include <algorithm>
#include <cmath>

namespace csbp {

void RunningMean::add(double v) {
  ++n_;
  const double d = v - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (v - mean_);
}

void RunningMean::merge(const RunningMean& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double n = static_cast<double>(n_ + o.n_);
  const double d = o.mean_ - mean_;
  mean_ += d * static_cast<double>(o.n_) / n;
  m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
  n_ += o.n_;
}

MeanEstimate RunningMean::estimate() const {
  MeanEstimate e;
  e.n = n_;
  if (n_ == 0) return e;
  e.mean = mean_;
  e.std_error = n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1) / static_cast<double>(n_)) : 0.0;
  return e;
}

MeanEstimate mean_of(const std::vector<double>& v) {
  RunningMean r;
  for (double x : v) r.add(x);
  return r.estimate();
}

SurvivalEcdf::SurvivalEcdf(std::vector<Observation> obs) : n_(obs.size()) {
  // events before censorings at tied times
  std::sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) {
    if (a.value != b.value) return a.value < b.value;
    return !a.censored && b.censored;
  });
  double surv = 1.0;
  std::size_t at_risk = n_;
  std::size_t i = 0;
  while (i < obs.size()) {
    const double t = obs[i].value;
    if (std::isinf(t)) {
      if (obs[i].censored) ++censored_; else ++infinite_;
      ++i;
      continue;
    }
    std::size_t d = 0, c = 0;
    while (i < obs.size() && obs[i].value == t) {
      if (obs[i].censored) ++c; else ++d;
      ++i;
    }
    end_ = t;
    if (d > 0) {
      surv *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      steps_.emplace_back(t, 1.0 - surv);
    }
    censored_ += c;
    at_risk -= d + c;
  }
}

double SurvivalEcdf::cdf(double t) const {
  const auto it = std::upper_bound(steps_.begin(), steps_.end(), t,
                                   [](double v, const auto& s) { return v < s.first; });
  if (it == steps_.begin()) return 0.0;
  return std::prev(it)->second;
}

double ks_distance(const SurvivalEcdf& emp, const std::function<double(double)>& ref,
                   double t_max) {
  double ks = 0.0, prev = 0.0;
  for (const auto& [t, f] : emp.steps()) {
    if (t > t_max) break;
    const double r = ref(t);
    ks = std::max({ks, std::abs(f - r), std::abs(prev - r)});
    prev = f;
  }
  if (std::isfinite(t_max)) ks = std::max(ks, std::abs(prev - ref(t_max)));
  return ks;
}

}  // namespace csbp
