#include "csbp/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace csbp {

Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError("config file " + path + ": " + e.message() + " (line " +
                          std::to_string(e.line()) + ")");
  }
  Settings out;
  auto put = [&](const std::string& key, const std::string& value) {
    if (!out.emplace(key, value).second)
      throw ValidationError("config file " + path + ": key '" + key + "' given twice");
  };
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      put(name, node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) put(key, leaf.data());
  }
  return out;
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  const auto e = s.find_last_not_of(" \t\r\"");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "inf" || v == "+inf") return kInf;
  if (v == "nan" || v == "auto" || v.empty()) return kNaN;
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ValidationError("setting '" + key + "': '" + v + "' is not a number");
  }
}

long long to_int(const std::string& key, const std::string& raw) {
  const double d = to_double(key, raw);
  if (!std::isfinite(d) || d != std::floor(d))
    throw ValidationError("setting '" + key + "': '" + trim(raw) + "' is not an integer");
  return static_cast<long long>(d);
}

bool to_bool(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("setting '" + key + "': '" + v + "' is not a boolean");
}

std::vector<double> to_list(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(to_double(key, item));
  }
  if (out.empty()) throw ValidationError("setting '" + key + "' needs a comma-separated list");
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_settings(const Settings& s) {
  ExperimentConfig c;
  for (const auto& [key, raw] : s) {
    const std::string v = trim(raw);
    if (key == "mechanism") c.mechanism = v;
    else if (key == "ladder") c.ladder = v;
    else if (key == "levels") c.levels = static_cast<int>(to_int(key, v));
    else if (key == "speed" || key == "h") c.speed = v;
    else if (key == "theta") c.theta = to_double(key, v);
    else if (key == "x0") c.x0 = to_double(key, v);
    else if (key == "T") c.T = to_double(key, v);
    else if (key == "dt") c.dt = to_double(key, v);
    else if (key == "delta") c.delta = to_double(key, v);
    else if (key == "eta") c.eta = to_double(key, v);
    else if (key == "M") c.M = to_double(key, v);
    else if (key == "reps") {
      const auto r = to_int(key, v);
      if (r < 0) throw ValidationError("reps must be >= 0");
      c.reps = static_cast<std::size_t>(r);
    } else if (key == "seed") {
      const auto r = to_int(key, v);
      if (r < 0) throw ValidationError("seed must be >= 0");
      c.seed = static_cast<std::uint64_t>(r);
    } else if (key == "zero") {
      if (v == "grid") c.zero = ZeroDetection::grid;
      else if (v == "bridge") c.zero = ZeroDetection::bridge;
      else throw ValidationError("zero must be grid or bridge");
    } else if (key == "small_jumps") {
      if (v == "compensate-mean") c.small_jumps = SmallJumpMode::compensate_mean;
      else if (v == "gaussian-approx") c.small_jumps = SmallJumpMode::gaussian_approx;
      else throw ValidationError("small_jumps must be compensate-mean or gaussian-approx");
    } else if (key == "test_levels") {
      c.test_levels.clear();
      for (double d : to_list(key, v)) {
        if (d != std::floor(d) || d < 1) throw ValidationError("test_levels must be positive integers");
        c.test_levels.push_back(static_cast<int>(d));
      }
    } else if (key == "k") c.k = to_list(key, v);
    else if (key == "exp_level") c.exp_level = to_bool(key, v);
    else if (key == "clock_cap") c.clock_cap = to_double(key, v);
    else if (key == "t_check") c.t_check = to_double(key, v);
    else if (key == "ks_threshold") c.ks_threshold = to_double(key, v);
    else if (key == "p_threshold") c.p_threshold = to_double(key, v);
    else if (key == "max_censored") c.max_censored = to_double(key, v);
    else if (key == "strong_mode") c.strong_mode = v;
    else if (key == "as_level") c.as_level = static_cast<int>(to_int(key, v));
    else if (key == "as_tol") c.as_tol = to_double(key, v);
    else if (key == "as_fraction") c.as_fraction = to_double(key, v);
    else if (key == "lambdas") c.lambdas = to_list(key, v);
    else if (key == "times") c.times = to_list(key, v);
    else if (key == "laplace_delta") c.laplace_delta = to_double(key, v);
    else if (key == "survival_t") c.survival_t = to_double(key, v);
    else if (key == "zero_mechanism") c.zero_mechanism = v;
    else if (key == "zero_x") c.zero_x = to_list(key, v);
    else if (key == "zero_dt") c.zero_dt = to_double(key, v);
    else if (key == "zero_M_rho") c.zero_M_rho = to_double(key, v);
    else if (key == "out_json" || key == "out") c.out_json = v;
    else if (key == "out_csv") c.out_csv = v;
    else throw ValidationError("unknown setting '" + key + "'");
  }
  std::sort(c.test_levels.begin(), c.test_levels.end());
  c.test_levels.erase(std::unique(c.test_levels.begin(), c.test_levels.end()), c.test_levels.end());
  return c;
}

void ExperimentConfig::validate() const {
  if (reps < 100) throw ValidationError("reps must be >= 100");
  if (levels < 1) throw ValidationError("levels must be >= 1");
  if (!(x0 > 0.0)) throw ValidationError("x0 must be > 0");
  if (!(T > 0.0)) throw ValidationError("T must be > 0");
  if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
  if (!(delta > 0.0)) throw ValidationError("delta must be > 0");
  if (!(eta >= 0.0)) throw ValidationError("eta must be >= 0");
  if (!(M > x0)) throw ValidationError("M must exceed x0");
  if (test_levels.empty()) throw ValidationError("test_levels is empty");
  for (int n : test_levels)
    if (n > levels) throw ValidationError("test level " + std::to_string(n) + " exceeds levels");
  for (double v : k)
    if (!(v > 0.0)) throw ValidationError("k multipliers must be > 0");
  if (strong_mode != "l1" && strong_mode != "as" && strong_mode != "killed")
    throw ValidationError("strong_mode must be l1, as or killed");
  if (!(as_fraction > 0.0 && as_fraction <= 1.0)) throw ValidationError("as_fraction must be in (0,1]");
  if (!(laplace_delta > 0.0)) throw ValidationError("laplace_delta must be > 0");
  for (double t : times)
    if (!(t > 0.0)) throw ValidationError("times must be > 0");
  for (double l : lambdas)
    if (!(l >= 0.0)) throw ValidationError("lambdas must be >= 0");
  for (double x : zero_x)
    if (!(x > 0.0)) throw ValidationError("zero_x must be > 0");
}

}  // namespace csbp
