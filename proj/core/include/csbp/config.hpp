#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "csbp/pathsim.hpp"

namespace csbp {

// Flat key/value settings. Every key can come from the INI config file (any
// section) or from the command line.
using Settings = std::map<std::string, std::string>;

Settings load_settings(const std::string& path);

struct ExperimentConfig {
  std::string mechanism = "kind=stable alpha=0.5 k=1";
  std::string ladder = "power:2";
  int levels = 64;
  std::string speed = "construct:0";
  double theta = kNaN;
  double x0 = 1.0;

  double T = kInf;
  double dt = 0.01;
  double delta = 1e-6;
  double eta = 1e-3;
  double M = 1e8;
  std::size_t reps = 10000;
  std::uint64_t seed = 1;
  ZeroDetection zero = ZeroDetection::bridge;
  SmallJumpMode small_jumps = SmallJumpMode::compensate_mean;

  std::vector<int> test_levels{8, 16, 32, 64};
  std::vector<double> k{1.0};
  bool exp_level = false;
  double clock_cap = kNaN;  // default: c + 8, or t_check for Zinf
  double t_check = 5.0;
  double ks_threshold = 0.03;
  double p_threshold = 0.01;  // Zinf: bound on P(sigma <= t_check) at the largest level
  double max_censored = 0.2;

  std::string strong_mode = "l1";  // l1 | as | killed
  int as_level = 12;
  double as_tol = 0.05;
  double as_fraction = 0.95;

  std::vector<double> lambdas{0.5, 1.0, 2.0};
  std::vector<double> times{0.5, 1.0};
  double laplace_delta = 1e-4;
  double survival_t = 1.0;
  std::string zero_mechanism = "kind=quadratic a=-1 sigma2=2";
  std::vector<double> zero_x{0.5, 1.0, 2.0};
  double zero_dt = 0.01;
  double zero_M_rho = 20.0;  // stop once rho * X exceeds this

  std::string out_json;
  std::string out_csv;

  static ExperimentConfig from_settings(const Settings& s);
  void validate() const;
};

}  // namespace csbp
