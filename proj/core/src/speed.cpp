#include "csbp/speed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace csbp {

SpeedSequence SpeedSequence::power(double p) {
  if (!(p > 0.0)) throw ValidationError("power speed needs p > 0");
  SpeedSequence s;
  s.kind_ = Kind::power;
  s.a_ = p;
  std::ostringstream os;
  os << "power:" << p;
  s.label_ = os.str();
  return s;
}

SpeedSequence SpeedSequence::exp_family(double c, double p) {
  if (!(c < 0.0) || !(p > 0.0)) throw ValidationError("exp speed needs c < 0 and p > 0");
  SpeedSequence s;
  s.kind_ = Kind::exponential;
  s.a_ = c;
  s.b_ = p;
  std::ostringstream os;
  os << "exp:" << c << "*n^" << p;
  s.label_ = os.str();
  return s;
}

SpeedSequence SpeedSequence::table(int first, std::vector<double> log_h, std::string label) {
  if (log_h.empty()) throw ValidationError("speed table is empty");
  SpeedSequence s;
  s.kind_ = Kind::table;
  s.first_ = first;
  s.table_ = std::move(log_h);
  s.label_ = std::move(label);
  std::size_t k = s.table_.size() - 1;
  while (k > 0 && s.table_[k] < s.table_[k - 1]) --k;
  s.n0_ = first + static_cast<int>(k);
  return s;
}

SpeedSequence SpeedSequence::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open speed table " + path);
  std::string line;
  std::vector<std::pair<int, double>> rows;
  bool header_seen = false;
  int col_log = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!header_seen) {
      header_seen = true;
      if (cells.empty() || cells[0] != "n") throw ValidationError("speed table needs header n,h");
      for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i] == "log_h") col_log = static_cast<int>(i);
      continue;
    }
    if (cells.size() < 2) throw ValidationError("malformed speed table row: " + line);
    try {
      const int n = std::stoi(cells[0]);
      const double lh = col_log >= 0 ? std::stod(cells.at(col_log)) : std::log(std::stod(cells[1]));
      rows.emplace_back(n, lh);
    } catch (const std::exception&) {
      throw ValidationError("malformed speed table row: " + line);
    }
  }
  if (rows.empty()) throw ValidationError("speed table " + path + " has no rows");
  std::vector<double> lh;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != rows[0].first + static_cast<int>(i))
      throw ValidationError("speed table indices must be consecutive");
    lh.push_back(rows[i].second);
  }
  return table(rows[0].first, std::move(lh), "table:" + path);
}

double SpeedSequence::log_h(int n) const {
  switch (kind_) {
    case Kind::power:
      if (n < 1) throw DomainError("power speed needs n >= 1");
      return -a_ * std::log(static_cast<double>(n)) + log_scale_;
    case Kind::exponential:
      return a_ * std::pow(static_cast<double>(n), b_) + log_scale_;
    case Kind::table: {
      const int i = n - first_;
      if (i < 0 || i >= static_cast<int>(table_.size()))
        throw DomainError("speed table has no entry for n = " + std::to_string(n));
      return table_[i] + log_scale_;
    }
  }
  return kNaN;
}

double SpeedSequence::h(int n) const { return std::exp(log_h(n)); }

SpeedSequence SpeedSequence::scaled(double factor) const {
  if (!(factor > 0.0)) throw ValidationError("speed scale factor must be > 0");
  SpeedSequence s = *this;
  s.log_scale_ += std::log(factor);
  std::ostringstream os;
  os << factor << "*" << label_;
  s.label_ = os.str();
  return s;
}

void SpeedSequence::write_csv(std::ostream& os) const {
  if (kind_ != Kind::table) throw ValidationError("only tabulated speeds are written as CSV");
  os << "n,h,log_h\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < table_.size(); ++i) {
    const double lh = table_[i] + log_scale_;
    os << first_ + static_cast<int>(i) << ',' << std::exp(lh) << ',' << lh << '\n';
  }
}

LadderFlows::LadderFlows(EsscherLadder ladder) : ladder_(std::move(ladder)), base_(ladder_.base()) {
  levels_.reserve(ladder_.size());
  for (std::size_t i = 0; i < ladder_.size(); ++i) levels_.emplace_back(ladder_.level(i));
}

double default_theta(const EsscherLadder& ladder) {
  const double r0 = ladder.rho(0), g = ladder.base().gamma();
  const double t = std::min(0.5 * r0, 0.5 * g);
  return std::isfinite(t) ? t : 1.0;
}

SpeedSequence parse_speed(const std::string& spec, const LadderFlows* flows, double theta) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw ValidationError("speed spec needs kind:value");
  const std::string kind = spec.substr(0, colon), arg = spec.substr(colon + 1);
  auto number = [&](const std::string& s) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError("speed spec '" + spec + "': '" + s + "' is not a number");
    }
  };
  if (kind == "power") return SpeedSequence::power(number(arg));
  if (kind == "exp") {
    // c*n, c*n^p
    std::string s = arg;
    s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
    const auto star = s.find("*n");
    if (star == std::string::npos) throw ValidationError("exp speed must look like c*n^p");
    const double c = number(s.substr(0, star));
    double p = 1.0;
    const std::string rest = s.substr(star + 2);
    if (!rest.empty()) {
      if (rest[0] != '^') throw ValidationError("exp speed must look like c*n^p");
      p = number(rest.substr(1));
    }
    return SpeedSequence::exp_family(c, p);
  }
  if (kind == "geom") {
    const double r = number(arg);
    if (!(r > 1.0)) throw ValidationError("geom speed needs r > 1");
    auto s = SpeedSequence::exp_family(-std::log(r), 1.0);
    return s;
  }
  if (kind == "table") return SpeedSequence::read_csv(arg);
  if (kind == "construct") {
    if (!flows) throw ValidationError("construct speed needs a ladder");
    const double c = (arg == "inf" || arg == "Inf" || arg == "infinity") ? kInf : number(arg);
    const double th = std::isnan(theta) ? default_theta(flows->ladder()) : theta;
    return construct_speed_for_c(*flows, c, th);
  }
  throw ValidationError("unknown speed kind '" + kind + "'");
}

double shifted_integral_log(const LadderFlows& flows, std::size_t i, double log_h_n, double theta) {
  const auto& lvl = flows.level(i);
  if (!(theta > 0.0) || !(theta < lvl.mechanism().rho()))
    throw DomainError("shifted integral needs 0 < theta < rho_n");
  const double lt = std::log(theta);
  if (log_h_n == lt) return 0.0;
  if (log_h_n > lt) throw DomainError("shifted integral needs h_n <= theta");
  return lvl.integral_log(log_h_n, lt);
}

double shifted_integral(const LadderFlows& flows, std::size_t i, double h_n, double theta) {
  if (!(h_n > 0.0)) throw DomainError("shifted integral needs h_n > 0");
  return shifted_integral_log(flows, i, std::log(h_n), theta);
}

const char* tail_kind_name(TailKind k) {
  switch (k) {
    case TailKind::stabilized: return "stabilized";
    case TailKind::converging: return "converging";
    case TailKind::diverging: return "diverging";
    default: return "undetermined";
  }
}

TailEstimate analyze_tail(const std::vector<double>& v, double stab_tol) {
  TailEstimate out;
  const std::size_t N = v.size();
  if (N == 0) return out;
  out.limit = v.back();
  if (N < 8) return out;
  const auto q0 = v.begin() + static_cast<std::ptrdiff_t>(3 * N / 4);
  const auto [mn, mx] = std::minmax_element(q0, v.end());
  if (std::isfinite(*mx) && *mx - *mn < stab_tol * (1.0 + std::abs(v.back()))) {
    out.kind = TailKind::stabilized;
    return out;
  }
  const double a = v[N / 4 - 1], b = v[N / 2 - 1], c = v[N - 1];
  const double d1 = b - a, d2 = c - b;
  if (!std::isfinite(c) || !std::isfinite(d2)) {
    out.kind = TailKind::diverging;
    out.limit = c > 0 ? kInf : -kInf;
    return out;
  }
  if (d1 == 0.0) return out;
  const double r = d2 / d1;
  if (r >= 1.0) {
    out.kind = TailKind::diverging;
    out.limit = d2 > 0.0 ? kInf : -kInf;
  } else if (r > 0.0) {
    out.kind = TailKind::converging;
    out.limit = c - d2 * d2 / (d2 - d1);
  }
  return out;
}

FlowLimit flow_limit_l(const LadderFlows& flows, const SpeedSequence& h, double t, int N) {
  const auto& lad = flows.ladder();
  N = std::min<int>(N, static_cast<int>(lad.size()));
  FlowLimit out;
  out.u.reserve(N);
  for (int i = 0; i < N; ++i) {
    const int n = lad.index(i);
    out.u.push_back(flows.level(i).solve_ut_log(t, h.log_h(n)).u);
  }
  const auto te = analyze_tail(out.u);
  out.l_estimate = te.kind == TailKind::diverging ? out.u.back() : te.limit;
  if (te.kind == TailKind::converging) out.l_estimate = std::max(0.0, out.l_estimate);
  out.stabilized = te.kind == TailKind::stabilized;
  return out;
}

double flow_limit_c(const LadderFlows& flows, const SpeedSequence& h, int N, double t_max,
                    double zero_level) {
  const auto& lad = flows.ladder();
  N = std::min<int>(N, static_cast<int>(lad.size()));
  const std::size_t i = N - 1;
  const double lh = h.log_h(lad.index(i));
  auto zero = [&](double t) { return flows.level(i).solve_ut_log(t, lh).u < zero_level; };
  if (!zero(0.0)) return 0.0;
  if (zero(t_max)) return kInf;
  return bisect_boundary(zero, 0.0, t_max, 80, 1e-12);
}

double rv_ratio(const EsscherLadder& ladder, const SpeedSequence& h, std::size_t i) {
  const double lh = h.log_h(ladder.index(i));
  return std::abs(lh) / ladder.base().phi_prime(ladder.eps(i));
}

double ratio_2899(const EsscherLadder& ladder, const SpeedSequence& h, std::size_t i) {
  const double e = ladder.eps(i);
  const auto& b = ladder.base();
  return b.phi(h.h(ladder.index(i)) + e) / b.phi(e);
}

const char* speed_class_name(SpeedClass c) {
  switch (c) {
    case SpeedClass::Z0: return "Z0";
    case SpeedClass::Zc: return "Zc";
    case SpeedClass::Zinf: return "Zinf";
    default: return "inconclusive";
  }
}

SpeedClass parse_speed_class(const std::string& s) {
  if (s == "Z0") return SpeedClass::Z0;
  if (s == "Zc") return SpeedClass::Zc;
  if (s == "Zinf") return SpeedClass::Zinf;
  return SpeedClass::inconclusive;
}

const char* criterion_name(Criterion c) {
  switch (c) {
    case Criterion::rv: return "rv";
    case Criterion::cond2899: return "cond2899";
    default: return "integral";
  }
}

const char* sum_verdict_name(SumVerdict v) {
  switch (v) {
    case SumVerdict::summable: return "summable";
    case SumVerdict::divergent: return "divergent";
    default: return "inconclusive";
  }
}

namespace {

bool class_from_limit(const TailEstimate& te, double zero_tol, SpeedClass& cls, double& c) {
  if (te.kind == TailKind::diverging && te.limit > 0) {
    cls = SpeedClass::Zinf;
    c = kInf;
    return true;
  }
  if (te.kind == TailKind::stabilized || te.kind == TailKind::converging) {
    if (te.limit <= zero_tol) {
      cls = SpeedClass::Z0;
      c = 0.0;
    } else {
      cls = SpeedClass::Zc;
      c = te.limit;
    }
    return true;
  }
  return false;
}

std::pair<double, SumVerdict> decay_verdict(const std::vector<double>& terms, int first) {
  const std::size_t N = terms.size();
  if (N < 8) return {kNaN, SumVerdict::inconclusive};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  bool underflow = false;
  for (std::size_t i = N / 2; i < N; ++i) {
    if (!(terms[i] > 0.0)) {
      underflow = underflow || terms[i] == 0.0;
      continue;
    }
    if (!std::isfinite(terms[i])) return {-kInf, SumVerdict::divergent};
    const double x = std::log(static_cast<double>(first + static_cast<int>(i)));
    const double y = std::log(terms[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 4) return {kInf, underflow ? SumVerdict::summable : SumVerdict::inconclusive};
  const double p = -(m * sxy - sx * sy) / (m * sxx - sx * sx);
  if (p > 1.1) return {p, SumVerdict::summable};
  if (p < 0.9) return {p, SumVerdict::divergent};
  return {p, SumVerdict::inconclusive};
}

}  // namespace

SummabilityReport summability_checks(const EsscherLadder& ladder, const SpeedSequence& h, int N) {
  N = std::min<int>(N, static_cast<int>(ladder.size()));
  SummabilityReport r;
  const auto& b = ladder.base();
  std::vector<double> t1, t2;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < N; ++i) {
    const double e = ladder.eps(i);
    const double lh = h.log_h(ladder.index(i));
    const double pe = b.phi(e);
    const double a1 = pe / b.phi(e + std::exp(lh));
    const double a2 = std::exp(std::log(pe) - lh);
    t1.push_back(a1);
    t2.push_back(a2);
    s1 += a1;
    s2 += a2;
    r.thm1086_partial.push_back(s1);
    r.prop0456_partial.push_back(s2);
  }
  std::tie(r.thm1086_exponent, r.thm1086) = decay_verdict(t1, ladder.first_index());
  std::tie(r.prop0456_exponent, r.prop0456) = decay_verdict(t2, ladder.first_index());
  return r;
}

ClassificationReport classify(const LadderFlows& flows, const SpeedSequence& h, double theta,
                              int N, const ClassifyPolicy& policy) {
  const auto& lad = flows.ladder();
  N = std::min<int>(N, static_cast<int>(lad.size()));
  if (N < 8) throw ValidationError("classification needs N >= 8 levels");
  ClassificationReport rep;
  rep.theta = theta;
  rep.N = N;
  const auto& base = lad.base();
  const bool rv_ok = base.rv_index().has_value();
  const bool integral_ok = flows.base().explosive() && theta < base.rho();
  const double F_theta = integral_ok ? flows.base().F(theta) : kNaN;

  for (int i = 0; i < N; ++i) {
    const int n = lad.index(i);
    rep.n.push_back(n);
    if (rv_ok) rep.rv.push_back(rv_ratio(lad, h, i));
    rep.ratio2899.push_back(ratio_2899(lad, h, i));
    if (integral_ok) {
      const double I = shifted_integral_log(flows, i, std::min(h.log_h(n), std::log(theta)), theta);
      rep.integral.push_back(I);
      rep.integral_gap.push_back(I - F_theta);
    }
  }
  const auto sums = summability_checks(lad, h, N);
  rep.thm1086_partial = sums.thm1086_partial;
  rep.prop0456_partial = sums.prop0456_partial;

  // theta sweep on the integral criterion
  if (integral_ok) {
    std::vector<double> limits;
    for (double f : {1.0, 0.5, 0.25}) {
      const double th = theta * f;
      const double Ft = flows.base().F(th);
      std::vector<double> gap;
      for (int i = 0; i < N; ++i) {
        const double lh = std::min(h.log_h(lad.index(i)), std::log(th));
        gap.push_back(shifted_integral_log(flows, i, lh, th) - Ft);
      }
      const auto te = analyze_tail(gap, policy.stab_tol);
      if (te.kind == TailKind::stabilized || te.kind == TailKind::converging)
        limits.push_back(te.limit);
    }
    if (limits.size() == 3) {
      const auto [mn, mx] = std::minmax_element(limits.begin(), limits.end());
      rep.c_spread = *mx - *mn;
    }
  } else {
    rep.notes.push_back("integral criterion unavailable: base mechanism not explosive or theta >= rho");
  }

  for (Criterion crit : policy.order) {
    SpeedClass cls;
    double c;
    if (crit == Criterion::rv) {
      if (!rv_ok) {
        rep.notes.push_back("rv criterion skipped: phi is not flagged regularly varying");
        continue;
      }
      if (class_from_limit(analyze_tail(rep.rv, policy.stab_tol), policy.zero_tol, cls, c)) {
        rep.cls = cls;
        rep.c_estimate = c;
        rep.decided_by = "rv";
        return rep;
      }
      rep.notes.push_back("rv ratio tail undetermined");
    } else if (crit == Criterion::cond2899) {
      const auto te = analyze_tail(rep.ratio2899, policy.stab_tol);
      const auto q0 = rep.ratio2899.begin() + static_cast<std::ptrdiff_t>(3 * N / 4);
      const double tail_min = *std::min_element(q0, rep.ratio2899.end());
      const bool big_limit = te.kind == TailKind::diverging || te.limit > 1.0 + policy.margin_2899;
      if (big_limit && tail_min > 1.0 + policy.margin_2899) {
        rep.cls = SpeedClass::Z0;
        rep.c_estimate = 0.0;
        rep.decided_by = "cond2899";
        return rep;
      }
    } else if (crit == Criterion::integral) {
      if (!integral_ok) continue;
      if (class_from_limit(analyze_tail(rep.integral_gap, policy.stab_tol), policy.zero_tol, cls,
                           c)) {
        rep.cls = cls;
        rep.c_estimate = c;
        rep.decided_by = "integral";
        return rep;
      }
      rep.notes.push_back("integral-criterion tail undetermined");
    }
  }
  rep.cls = SpeedClass::inconclusive;
  return rep;
}

SpeedSequence construct_speed_for_c(const LadderFlows& flows, double c_target, double theta) {
  if (!(c_target >= 0.0)) throw DomainError("target c must be >= 0");
  const auto& lad = flows.ladder();
  if (!flows.base().explosive())
    throw DomainError("speed construction needs an explosive base mechanism");
  if (!(theta > 0.0) || !(theta < lad.rho(0))) throw DomainError("construction needs 0 < theta < rho_0");
  const double F_theta = flows.base().F(theta);
  std::vector<double> lh;
  lh.reserve(lad.size());
  for (std::size_t i = 0; i < lad.size(); ++i) {
    const double v = F_theta + (std::isinf(c_target) ? static_cast<double>(lad.index(i)) : c_target);
    lh.push_back(flows.level(i).log_solve_below(std::log(theta), v));
  }
  std::ostringstream os;
  os << "construct:" << c_target;
  return SpeedSequence::table(lad.first_index(), std::move(lh), os.str());
}

}  // namespace csbp
