#pragma once

#include <optional>
#include <string>
#include <vector>

#include "csbp/levy_measure.hpp"
#include "csbp/numeric.hpp"

namespace csbp {

struct BoundaryVerdict {
  bool finite = false;       // explosive / extinctive
  bool applicable = true;    // false: criterion does not apply (subordinator)
  double integral = kInf;    // value when finite
  double shell_ratio = kNaN; // tail ratio of successive dyadic shells
  int shells = 0;
};

// varphi(l) = b l + sigma2 l^2 / 2 + int (e^{-l x} - 1) pi(dx), where b is the
// net linear coefficient a + int_{x<1} x pi(dx). phi = -varphi.
class BranchingMechanism {
 public:
  BranchingMechanism(double net_drift, double sigma2, LevyMeasure measure,
                     const NumericPolicy& policy = default_policy());

  // Construct from the Levy-Khintchine drift `a` (compensator on x < 1).
  static BranchingMechanism from_triplet(double a, double sigma2, LevyMeasure measure,
                                         const NumericPolicy& policy = default_policy());

  double varphi(double lam) const;
  double varphi_prime(double lam) const;
  double varphi_second(double lam) const;
  double phi(double lam) const { return -varphi(lam); }
  double phi_prime(double lam) const { return -varphi_prime(lam); }

  double a() const;
  double net_drift() const { return b_; }
  double sigma2() const { return sigma2_; }
  const LevyMeasure& measure() const { return measure_; }
  const NumericPolicy& policy() const { return policy_; }

  bool is_subordinator() const { return sigma2_ == 0.0 && b_ <= 0.0; }
  double rho() const { return rho_; }
  double gamma() const { return gamma_; }
  // Index of regular variation of phi at 0, declared only for pure stable.
  std::optional<double> rv_index() const;

  BranchingMechanism esscher_shift(double eps) const;
  double tilt() const { return tilt_; }  // accumulated Esscher shift

  double psi_inverse(double y) const;
  BoundaryVerdict explosion_test(double theta) const;
  BoundaryVerdict extinction_test(double theta) const;

  std::string describe() const;

 private:
  void compute_roots();

  double b_;
  double sigma2_;
  LevyMeasure measure_;
  NumericPolicy policy_;
  double tilt_ = 0.0;
  double rho_ = kInf;
  double gamma_ = kInf;
};

// Parse "key=value" pairs separated by ';' or whitespace, e.g.
// "kind=stable alpha=0.5 k=1" or "kind=quadratic a=-1 sigma2=2".
BranchingMechanism parse_mechanism(const std::string& spec);

// eps_n for n = first, first+1, ..., strictly decreasing and positive.
class EsscherLadder {
 public:
  EsscherLadder(BranchingMechanism base, std::vector<double> eps, int first_index = 1);

  // "power:p" (eps_n = n^-p), "geom:r" (eps_n = r^-n), "list:e1,e2,..."
  static EsscherLadder from_spec(const BranchingMechanism& base, const std::string& spec,
                                 int levels, int first_index = 1);

  const BranchingMechanism& base() const { return base_; }
  std::size_t size() const { return eps_.size(); }
  int first_index() const { return first_; }
  int index(std::size_t i) const { return first_ + static_cast<int>(i); }
  // position of paper index n in the arrays; throws if absent
  std::size_t position(int n) const;
  double eps(std::size_t i) const { return eps_[i]; }
  const std::vector<double>& eps() const { return eps_; }
  const BranchingMechanism& level(std::size_t i) const { return levels_[i]; }
  double rho(std::size_t i) const { return levels_[i].rho(); }
  const std::string& spec() const { return spec_; }

 private:
  BranchingMechanism base_;
  std::vector<double> eps_;
  std::vector<BranchingMechanism> levels_;
  int first_;
  std::string spec_;
};

}  // namespace csbp
