#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "csbp/numeric.hpp"

namespace csbp {

struct MeanEstimate {
  double mean = kNaN;
  double std_error = kNaN;
  std::size_t n = 0;
};

class RunningMean {
 public:
  void add(double v);
  void merge(const RunningMean& o);
  MeanEstimate estimate() const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0, m2_ = 0.0;
};

MeanEstimate mean_of(const std::vector<double>& v);

// Observation: value with an event flag. Censored values mean "true value
// exceeds this"; +inf events (never happening) count as mass at infinity.
struct Observation {
  double value = 0.0;
  bool censored = false;
};

// Kaplan-Meier CDF estimate; reduces to the plain ECDF without censoring.
class SurvivalEcdf {
 public:
  explicit SurvivalEcdf(std::vector<Observation> obs);

  double cdf(double t) const;
  std::size_t size() const { return n_; }
  std::size_t censored() const { return censored_; }
  std::size_t at_infinity() const { return infinite_; }
  // (time, cdf right after the step) at every event time
  const std::vector<std::pair<double, double>>& steps() const { return steps_; }
  // last time at which the estimate is informative (largest observed time)
  double support_end() const { return end_; }

 private:
  std::vector<std::pair<double, double>> steps_;
  std::size_t n_ = 0, censored_ = 0, infinite_ = 0;
  double end_ = 0.0;
};

// sup_{t <= t_max} |F_emp(t) - F_ref(t)|, checked on both sides of each step.
double ks_distance(const SurvivalEcdf& emp, const std::function<double(double)>& ref,
                   double t_max = kInf);

}  // namespace csbp
