#include "csbp/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace csbp {

namespace {

template <class F>
BoundaryVerdict dyadic_shells(F&& shell, const NumericPolicy& pol) {
  BoundaryVerdict v;
  std::vector<double> s;
  s.reserve(pol.max_shells);
  for (int m = 0; m < pol.max_shells; ++m) s.push_back(shell(m));
  v.shells = pol.max_shells;
  const double last = s.back();
  const double prev = s[s.size() - 2];
  v.shell_ratio = prev > 0.0 ? last / prev : kInf;
  if (!std::isfinite(last) || v.shell_ratio > pol.shell_ratio_cut) {
    v.finite = false;
    v.integral = kInf;
    return v;
  }
  double sum = 0.0;
  for (double x : s) sum += x;
  sum += last * v.shell_ratio / (1.0 - v.shell_ratio);
  v.finite = true;
  v.integral = sum;
  return v;
}

}  // namespace

BranchingMechanism::BranchingMechanism(double net_drift, double sigma2, LevyMeasure measure,
                                       const NumericPolicy& policy)
    : b_(net_drift), sigma2_(sigma2), measure_(std::move(measure)), policy_(policy) {
  if (!std::isfinite(b_)) throw ValidationError("drift must be finite");
  if (!(sigma2_ >= 0.0) || !std::isfinite(sigma2_))
    throw ValidationError("sigma2 must be finite and >= 0");
  compute_roots();
}

BranchingMechanism BranchingMechanism::from_triplet(double a, double sigma2, LevyMeasure measure,
                                                    const NumericPolicy& policy) {
  const double b = a + measure.mean_below(1.0);
  return BranchingMechanism(b, sigma2, std::move(measure), policy);
}

double BranchingMechanism::a() const { return b_ - measure_.mean_below(1.0); }

double BranchingMechanism::varphi(double lam) const {
  if (!(lam >= 0.0)) throw DomainError("varphi needs lambda >= 0");
  if (lam == 0.0) return 0.0;
  return b_ * lam + 0.5 * sigma2_ * lam * lam + measure_.laplace_integral(lam);
}

double BranchingMechanism::varphi_prime(double lam) const {
  if (!(lam >= 0.0)) throw DomainError("varphi' needs lambda >= 0");
  return b_ + sigma2_ * lam + measure_.laplace_integral_d1(lam);
}

double BranchingMechanism::varphi_second(double lam) const {
  return sigma2_ + measure_.laplace_integral_d2(lam);
}

void BranchingMechanism::compute_roots() {
  if (is_subordinator()) {
    rho_ = kInf;
    gamma_ = kInf;
    return;
  }
  if (varphi_prime(0.0) >= 0.0) {
    rho_ = 0.0;
    gamma_ = 0.0;
    return;
  }
  double hi = 1.0;
  while (varphi(hi) <= 0.0) {
    hi *= 2.0;
    if (hi > policy_.bracket_limit) {
      if (sigma2_ == 0.0 && varphi_prime(hi) <= 0.0) {
        rho_ = kInf;
        gamma_ = kInf;
        return;
      }
      throw NumericError("no sign change of varphi below the bracket limit", hi);
    }
  }
  const double lo = hi > 1.0 ? 0.5 * hi : 0.0;
  rho_ = bisect_boundary([this](double x) { return varphi(x) <= 0.0; }, lo, hi);
  gamma_ = bisect_boundary([this](double x) { return varphi_prime(x) < 0.0; }, 0.0, rho_);
}

std::optional<double> BranchingMechanism::rv_index() const {
  if (const auto* ts = std::get_if<TemperedStable>(&measure_.kind())) {
    if (ts->beta == 0.0 && b_ == 0.0 && sigma2_ == 0.0) return ts->alpha;
  }
  return std::nullopt;
}

BranchingMechanism BranchingMechanism::esscher_shift(double eps) const {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw ValidationError("Esscher shift needs eps >= 0");
  if (eps == 0.0) return *this;
  BranchingMechanism out(b_ + eps * sigma2_, sigma2_, measure_.tilted(eps), policy_);
  out.tilt_ = tilt_ + eps;
  return out;
}

double BranchingMechanism::psi_inverse(double y) const {
  if (is_subordinator()) throw DomainError("psi is infinite for a subordinator");
  if (!(y >= 0.0)) throw DomainError("psi_inverse needs y >= 0");
  if (y == 0.0) return rho_;
  double hi = std::max(rho_, 1.0);
  while (varphi(hi) < y) {
    hi *= 2.0;
    if (hi > 1e300) throw NumericError("psi_inverse bracket overflow", y);
  }
  const double lo = std::max(rho_, 0.0);
  return bisect_boundary([this, y](double x) { return varphi(x) < y; }, lo, hi);
}

BoundaryVerdict BranchingMechanism::explosion_test(double theta) const {
  if (!(theta > 0.0) || !(theta < rho_))
    throw DomainError("explosion test needs 0 < theta < rho");
  auto shell = [this, theta](int m) {
    const double hi = std::ldexp(theta, -m), lo = 0.5 * hi;
    return quad::gauss_kronrod([this](double u) { return 1.0 / phi(u); }, lo, hi,
                               policy_.quad_tol)
        .value;
  };
  return dyadic_shells(shell, policy_);
}

BoundaryVerdict BranchingMechanism::extinction_test(double theta) const {
  if (is_subordinator()) {
    BoundaryVerdict v;
    v.applicable = false;
    return v;
  }
  if (!(theta > rho_)) throw DomainError("extinction test needs theta > rho");
  auto shell = [this, theta](int m) {
    const double lo = std::ldexp(theta, m), hi = 2.0 * lo;
    return quad::gauss_kronrod([this](double u) { return 1.0 / varphi(u); }, lo, hi,
                               policy_.quad_tol)
        .value;
  };
  return dyadic_shells(shell, policy_);
}

std::string BranchingMechanism::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "b=" << b_ << " sigma2=" << sigma2_ << " measure=" << measure_.kind_name();
  std::visit(
      [&os](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TemperedStable>) {
          os << "(alpha=" << m.alpha << ",k=" << m.k << ",beta=" << m.beta << ")";
        } else if constexpr (std::is_same_v<T, CompoundPoisson>) {
          os << "(rate=" << m.rate << ",shape=" << m.shape << ",param=" << m.param << ")";
        } else if constexpr (std::is_same_v<T, TabulatedDensity>) {
          os << "(points=" << m.x.size() << ",beta=" << m.beta << ")";
        }
      },
      measure_.kind());
  return os.str();
}

namespace {

std::map<std::string, std::string> split_kv(const std::string& spec) {
  std::map<std::string, std::string> kv;
  std::string s = spec;
  std::replace(s.begin(), s.end(), ';', ' ');
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ValidationError("mechanism spec token '" + tok + "' is not key=value");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

double num(const std::map<std::string, std::string>& kv, const std::string& key, double dflt,
           bool required = false) {
  const auto it = kv.find(key);
  if (it == kv.end()) {
    if (required) throw ValidationError("mechanism spec is missing '" + key + "'");
    return dflt;
  }
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("mechanism spec value for '" + key + "' is not a number");
  }
}

std::vector<double> num_list(const std::string& s) {
  std::vector<double> out;
  std::string t = s;
  std::replace(t.begin(), t.end(), ',', ' ');
  std::istringstream is(t);
  double v;
  while (is >> v) out.push_back(v);
  return out;
}

LevyMeasure read_tabulated(const std::map<std::string, std::string>& kv) {
  std::vector<double> x, d;
  if (kv.count("file")) {
    std::ifstream in(kv.at("file"));
    if (!in) throw ValidationError("cannot open tabulated density file " + kv.at("file"));
    std::string line;
    while (std::getline(in, line)) {
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ls(line);
      double a, b;
      if (ls >> a >> b) {
        x.push_back(a);
        d.push_back(b);
      }
    }
  } else {
    if (!kv.count("x") || !kv.count("density"))
      throw ValidationError("tabulated kind needs file= or x= and density=");
    x = num_list(kv.at("x"));
    d = num_list(kv.at("density"));
  }
  return LevyMeasure::tabulated(std::move(x), std::move(d));
}

}  // namespace

BranchingMechanism parse_mechanism(const std::string& spec) {
  const auto kv = split_kv(spec);
  const std::string kind = kv.count("kind") ? kv.at("kind") : "none";
  LevyMeasure m;
  if (kind == "none" || kind == "brownian" || kind == "quadratic") {
    m = LevyMeasure::none();
  } else if (kind == "stable") {
    m = LevyMeasure::stable(num(kv, "alpha", 0, true), num(kv, "k", 1.0));
  } else if (kind == "tempered-stable") {
    m = LevyMeasure::tempered_stable(num(kv, "alpha", 0, true), num(kv, "k", 1.0),
                                     num(kv, "beta", 0, true));
  } else if (kind == "compound-poisson") {
    const std::string law = kv.count("law") ? kv.at("law") : "exponential";
    if (law == "exponential") {
      m = LevyMeasure::compound_poisson(num(kv, "rate", 0, true), JumpLaw::exponential, 1.0,
                                        num(kv, "mu", 1.0));
    } else if (law == "gamma") {
      m = LevyMeasure::compound_poisson(num(kv, "rate", 0, true), JumpLaw::gamma,
                                        num(kv, "shape", 0, true), num(kv, "mu", 1.0));
    } else if (law == "dirac") {
      m = LevyMeasure::compound_poisson(num(kv, "rate", 0, true), JumpLaw::dirac, 1.0,
                                        num(kv, "at", 0, true));
    } else {
      throw ValidationError("unknown jump law '" + law + "'");
    }
  } else if (kind == "tabulated" || kind == "tabulated-density") {
    m = read_tabulated(kv);
  } else {
    throw ValidationError("unknown mechanism kind '" + kind + "'");
  }
  const double sigma2 = num(kv, "sigma2", 0.0);
  if (kv.count("a") && kv.count("b"))
    throw ValidationError("give either the drift a or the net drift b, not both");
  if (kv.count("a")) return BranchingMechanism::from_triplet(num(kv, "a", 0), sigma2, m);
  return BranchingMechanism(num(kv, "b", 0.0), sigma2, m);
}

EsscherLadder::EsscherLadder(BranchingMechanism base, std::vector<double> eps, int first_index)
    : base_(std::move(base)), eps_(std::move(eps)), first_(first_index) {
  if (eps_.empty()) throw ValidationError("ladder needs at least one level");
  for (std::size_t i = 0; i < eps_.size(); ++i) {
    if (!(eps_[i] > 0.0) || !std::isfinite(eps_[i]))
      throw ValidationError("ladder values must be finite and > 0");
    if (i > 0 && !(eps_[i] < eps_[i - 1]))
      throw ValidationError("ladder values must be strictly decreasing");
  }
  if (!(base_.varphi_prime(eps_.front()) < 0.0))
    throw ValidationError("varphi' must be negative on [0, eps_0]; lower the first level");
  levels_.reserve(eps_.size());
  for (double e : eps_) levels_.push_back(base_.esscher_shift(e));
}

EsscherLadder EsscherLadder::from_spec(const BranchingMechanism& base, const std::string& spec,
                                       int levels, int first_index) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw ValidationError("ladder spec needs kind:value");
  const std::string kind = spec.substr(0, colon), arg = spec.substr(colon + 1);
  std::vector<double> eps;
  if (kind == "list") {
    eps = num_list(arg);
    if (levels > 0 && static_cast<int>(eps.size()) > levels) eps.resize(levels);
  } else {
    double p;
    try {
      p = std::stod(arg);
    } catch (const std::exception&) {
      throw ValidationError("ladder parameter '" + arg + "' is not a number");
    }
    if (levels < 1) throw ValidationError("ladder needs N >= 1 levels");
    for (int i = 0; i < levels; ++i) {
      const double n = first_index + i;
      if (kind == "power") {
        if (!(p > 0.0)) throw ValidationError("power ladder needs p > 0");
        eps.push_back(std::pow(n, -p));
      } else if (kind == "geom") {
        if (!(p > 1.0)) throw ValidationError("geometric ladder needs r > 1");
        eps.push_back(std::pow(p, -n));
      } else {
        throw ValidationError("unknown ladder kind '" + kind + "'");
      }
    }
  }
  EsscherLadder out(base, std::move(eps), first_index);
  out.spec_ = spec;
  return out;
}

std::size_t EsscherLadder::position(int n) const {
  const int i = n - first_;
  if (i < 0 || i >= static_cast<int>(eps_.size()))
    throw ValidationError("level " + std::to_string(n) + " is outside the ladder");
  return static_cast<std::size_t>(i);
}

}  // namespace csbp
