#pragma once

#include <memory>
#include <string>
#include <vector>

#include "csbp/flow.hpp"
#include "csbp/mechanism.hpp"

namespace csbp {

// Decreasing h(n) -> 0, held on log scale so that e^{-n^2} and friends stay
// representable.
class SpeedSequence {
 public:
  static SpeedSequence power(double p);
  // log h(n) = c * n^p
  static SpeedSequence exp_family(double c, double p);
  static SpeedSequence table(int first, std::vector<double> log_h, std::string label);
  static SpeedSequence read_csv(const std::string& path);

  double log_h(int n) const;
  double h(int n) const;
  SpeedSequence scaled(double factor) const;
  const std::string& label() const { return label_; }
  bool is_table() const { return kind_ == Kind::table; }
  int table_first() const { return first_; }
  int table_last() const { return first_ + static_cast<int>(table_.size()) - 1; }
  // smallest n from which the sequence is strictly decreasing (tables)
  int n0() const { return n0_; }

  void write_csv(std::ostream& os) const;

 private:
  enum class Kind { power, exponential, table };
  Kind kind_ = Kind::power;
  double a_ = 1.0, b_ = 1.0;  // power: p; exponential: c, p
  double log_scale_ = 0.0;
  int first_ = 1;
  int n0_ = 1;
  std::vector<double> table_;
  std::string label_;
};

// CumulativeRate for the base mechanism and every ladder level.
class LadderFlows {
 public:
  explicit LadderFlows(EsscherLadder ladder);
  const EsscherLadder& ladder() const { return ladder_; }
  const CumulativeRate& base() const { return base_; }
  const CumulativeRate& level(std::size_t i) const { return levels_[i]; }
  std::size_t size() const { return levels_.size(); }

 private:
  EsscherLadder ladder_;
  CumulativeRate base_;
  std::vector<CumulativeRate> levels_;
};

double default_theta(const EsscherLadder& ladder);

// Parse "power:p", "exp:c*n^p", "geom:r" (h = r^-n), "table:<csv>",
// "construct:<c|inf>" (the last one needs `flows`).
SpeedSequence parse_speed(const std::string& spec, const LadderFlows* flows = nullptr,
                          double theta = kNaN);

// int_{h_n}^theta du / phi^(n)(u) at ladder position i.
double shifted_integral(const LadderFlows& flows, std::size_t i, double h_n, double theta);
double shifted_integral_log(const LadderFlows& flows, std::size_t i, double log_h_n, double theta);

enum class TailKind { stabilized, converging, diverging, undetermined };
struct TailEstimate {
  double limit = kNaN;
  TailKind kind = TailKind::undetermined;
};
TailEstimate analyze_tail(const std::vector<double>& v, double stab_tol = 1e-3);
const char* tail_kind_name(TailKind k);

struct FlowLimit {
  std::vector<double> u;  // u_t^(n)(h(n)), n = first .. first+N-1
  double l_estimate = kNaN;
  bool stabilized = false;
};
FlowLimit flow_limit_l(const LadderFlows& flows, const SpeedSequence& h, double t, int N);
// c(h) = sup{t : l_t(h) = 0} by bisection on t over [0, t_max].
double flow_limit_c(const LadderFlows& flows, const SpeedSequence& h, int N, double t_max = 20.0,
                    double zero_level = 1e-8);

double rv_ratio(const EsscherLadder& ladder, const SpeedSequence& h, std::size_t i);
double ratio_2899(const EsscherLadder& ladder, const SpeedSequence& h, std::size_t i);

enum class SpeedClass { Z0, Zc, Zinf, inconclusive };
const char* speed_class_name(SpeedClass c);
SpeedClass parse_speed_class(const std::string& s);

enum class Criterion { rv, cond2899, integral };
const char* criterion_name(Criterion c);

struct ClassifyPolicy {
  std::vector<Criterion> order{Criterion::rv, Criterion::cond2899, Criterion::integral};
  double zero_tol = 0.05;
  double stab_tol = 1e-3;
  double margin_2899 = 0.05;
};

struct ClassificationReport {
  SpeedClass cls = SpeedClass::inconclusive;
  double c_estimate = kNaN;
  double c_spread = kNaN;  // spread of the integral-criterion limit over a theta sweep
  std::string decided_by;
  double theta = kNaN;
  int N = 0;
  std::vector<int> n;
  std::vector<double> integral;       // I_n(theta)
  std::vector<double> integral_gap;   // I_n(theta) - int_0^theta du/phi
  std::vector<double> rv;             // empty when phi is not flagged RV
  std::vector<double> ratio2899;
  std::vector<double> thm1086_partial;
  std::vector<double> prop0456_partial;
  std::vector<std::string> notes;
};

ClassificationReport classify(const LadderFlows& flows, const SpeedSequence& h, double theta,
                              int N, const ClassifyPolicy& policy = {});

SpeedSequence construct_speed_for_c(const LadderFlows& flows, double c_target, double theta);

enum class SumVerdict { summable, divergent, inconclusive };
const char* sum_verdict_name(SumVerdict v);
struct SummabilityReport {
  std::vector<double> thm1086_partial;
  std::vector<double> prop0456_partial;
  double thm1086_exponent = kNaN;  // fitted decay exponent of the terms
  double prop0456_exponent = kNaN;
  SumVerdict thm1086 = SumVerdict::inconclusive;
  SumVerdict prop0456 = SumVerdict::inconclusive;
};
SummabilityReport summability_checks(const EsscherLadder& ladder, const SpeedSequence& h, int N);

}  // namespace csbp
