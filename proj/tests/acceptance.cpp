// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// CSBP_ACCEPT_SCALE (default 1) multiplies every replication count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "csbp/harness.hpp"
#include "csbp/lamperti.hpp"
#include "csbp/speed.hpp"

using namespace csbp;

namespace {

struct Line {
  int id;
  bool pass;
  std::string detail;
};
std::vector<Line> lines;

void report(int id, bool pass, const std::string& detail) {
  lines.push_back({id, pass, detail});
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string f(double v, int prec = 6) {
  char b[64];
  std::snprintf(b, sizeof b, "%.*g", prec, v);
  return b;
}

double scale() {
  const char* s = std::getenv("CSBP_ACCEPT_SCALE");
  return s ? std::atof(s) : 1.0;
}
std::size_t reps(double r) { return static_cast<std::size_t>(std::max(100.0, std::round(r * scale()))); }

const Verdict* find(const ExperimentReport& r, const std::string& name) {
  for (const auto& v : r.verdicts)
    if (v.name == name) return &v;
  return nullptr;
}

std::string verdict_text(const ExperimentReport& r, const std::string& name) {
  const Verdict* v = find(r, name);
  return v ? v->detail : "missing verdict " + name;
}
bool verdict_pass(const ExperimentReport& r, const std::string& name) {
  const Verdict* v = find(r, name);
  return v && v->pass && r.valid;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const BranchingMechanism& stable() {
  static const auto m = parse_mechanism("kind=stable alpha=0.5 k=1");
  return m;
}

void criterion1() {
  const CumulativeRate cr(stable());
  const double u1 = cr.solve_ut(1.0, 1.0).u, u0 = cr.solve_ut(1.0, 0.0).u;
  double worst = 0.0;
  for (int i = 1; i <= 10; ++i)
    for (int k = 1; k <= 10; ++k)
      for (int l = 0; l < 10; ++l) {
        const double t = 0.2 * i, s = 0.2 * k, lam = l == 0 ? 0.0 : std::pow(10.0, -3.0 + 0.6 * l);
        const double a = cr.solve_ut(t + s, lam).u;
        const double b = cr.solve_ut(t, cr.solve_ut(s, lam).u).u;
        worst = std::max(worst, std::abs(a - b) / std::max(1.0, a));
      }
  const bool ok = std::abs(u1 - 2.25) <= 1e-8 && std::abs(u0 - 0.25) <= 1e-8 && worst <= 1e-8;
  report(1, ok, "u_1(1) = " + f(u1, 15) + ", u_1(0) = " + f(u0, 15) +
                    ", max semigroup residual " + f(worst, 3) + " over 10x10x10");
}

void criterion4() {
  // stable ladder, 64 levels + limit, fixed cutoff, grid knots
  const auto lad = EsscherLadder::from_spec(stable(), "power:2", 64);
  SimPolicy p;
  p.T = 1.0;
  p.dt = 0.01;
  p.delta = 1e-4;
  p.seed = 404;
  std::uint64_t pairs = 0, bad = 0;
  std::uint32_t r = 0;
  while (pairs < 10'000'000ull) {
    p.replication = r++;
    const auto fam = simulate_coupled(lad, 1.0, p);
    for (std::size_t k = 0; k < fam.times.size(); ++k)
      for (std::size_t l = 0; l < fam.levels(); ++l) {
        ++pairs;
        if (l + 1 < fam.levels())
          bad += fam.left[l][k] > fam.left[l + 1][k] || fam.right[l][k] > fam.right[l + 1][k];
      }
  }
  // mixed mechanism with a Brownian part, fewer levels
  const auto mixed = parse_mechanism("kind=tempered-stable alpha=0.6 k=1 beta=0.2 sigma2=0.5 b=-0.3");
  const auto lad2 = EsscherLadder::from_spec(mixed, "power:2", 16);
  std::uint64_t pairs2 = 0, bad2 = 0;
  for (std::uint32_t q = 0; q < 200; ++q) {
    p.replication = q;
    const auto fam = simulate_coupled(lad2, 1.0, p);
    for (std::size_t k = 0; k < fam.times.size(); ++k)
      for (std::size_t l = 0; l < fam.levels(); ++l) {
        ++pairs2;
        if (l + 1 < fam.levels())
          bad2 += fam.left[l][k] > fam.left[l + 1][k] || fam.right[l][k] > fam.right[l + 1][k];
      }
  }
  // Brownian-only ladder: X - X^eps = eps sigma2 t
  const auto quad = parse_mechanism("kind=quadratic a=-1 sigma2=2");
  const EsscherLadder lad3(quad, {0.4, 0.2, 0.1, 0.05});
  SimPolicy pb;
  pb.T = 5.0;
  pb.dt = 0.001;
  double worst = 0.0;
  for (std::uint32_t q = 0; q < 20; ++q) {
    pb.replication = q;
    const auto fam = simulate_coupled(lad3, 1.0, pb);
    const std::size_t lim = fam.levels() - 1;
    for (std::size_t l = 0; l < lim; ++l)
      for (std::size_t k = 0; k < fam.times.size(); ++k)
        worst = std::max(worst, std::abs(fam.right[lim][k] - fam.right[l][k] -
                                         fam.eps[l] * quad.sigma2() * fam.times[k]) /
                                    std::max(1.0, std::abs(fam.right[lim][k])));
  }
  const bool ok = bad == 0 && bad2 == 0 && worst < 1e-12;
  report(4, ok, std::to_string(bad) + " violations in " + std::to_string(pairs) +
                    " (path, time) pairs (stable, 65 levels); " + std::to_string(bad2) + " in " +
                    std::to_string(pairs2) + " (jumps + Brownian); Brownian ladder max |X - X^eps - eps s2 t| = " +
                    f(worst, 3));
}

void criterion6() {
  const LadderFlows flows(EsscherLadder::from_spec(stable(), "power:2", 64));
  const double th = default_theta(flows.ladder());
  const auto a = classify(flows, parse_speed("power:1"), th, 64);
  const auto b = classify(flows, parse_speed("exp:-0.5*n"), th, 64);
  const auto c = classify(flows, parse_speed("exp:-1*n^2"), th, 64);
  bool ok = a.cls == SpeedClass::Z0 && b.cls == SpeedClass::Zc && std::abs(b.c_estimate - 1.0) <= 0.05 &&
            c.cls == SpeedClass::Zinf;
  std::string d = std::string("1/n -> ") + speed_class_name(a.cls) + ", e^{-n/2} -> " +
                  speed_class_name(b.cls) + " c=" + f(b.c_estimate, 5) + ", e^{-n^2} -> " +
                  speed_class_name(c.cls) + "; round trip:";
  for (double target : {0.0, 1.0, kInf}) {
    const auto h = construct_speed_for_c(flows, target, th);
    const auto r = classify(flows, h, th, 64);
    const bool hit = target == 0.0   ? r.cls == SpeedClass::Z0
                     : std::isinf(target) ? r.cls == SpeedClass::Zinf
                                          : r.cls == SpeedClass::Zc && std::abs(r.c_estimate - target) <= 0.05;
    ok = ok && hit;
    d += " c=" + f(target) + " -> " + speed_class_name(r.cls) +
         (r.cls == SpeedClass::Zc ? " " + f(r.c_estimate, 5) : std::string());
  }
  report(6, ok, d);
}

ExperimentConfig law_config() {
  ExperimentConfig c;
  c.reps = reps(100000);
  c.seed = 2024;
  return c;
}

void law_criteria() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentReport r = run_law_validation(law_config());
  const double secs = seconds_since(t0);

  report(2, verdict_pass(r, "survival_frequency") && secs <= 300.0,
         verdict_text(r, "survival_frequency") + ", R=" + std::to_string(law_config().reps) +
             "; whole law run " + f(secs, 3) + " s");

  const CumulativeRate cr(stable());
  const auto q1 = cr.zeta_moment(1.0, 1), q2 = cr.zeta_moment(1.0, 2);
  const double e1 = std::abs(q1.value + q1.remainder - std::sqrt(M_PI));
  const double e2 = std::abs(q2.value + q2.remainder - 4.0);
  report(3, verdict_pass(r, "zeta_mean") && verdict_pass(r, "zeta_second_moment") && e1 <= 1e-6 && e2 <= 1e-6,
         "mean " + verdict_text(r, "zeta_mean") + "; second " + verdict_text(r, "zeta_second_moment") +
             "; quadrature errors " + f(e1, 2) + ", " + f(e2, 2));
  report(5, verdict_pass(r, "laplace_all_levels"), verdict_text(r, "laplace_all_levels"));
  report(10, verdict_pass(r, "zero_hit_frequency"), verdict_text(r, "zero_hit_frequency"));
}

ExperimentConfig weak_config(const std::string& speed, double R) {
  ExperimentConfig c;
  c.speed = speed;
  c.reps = reps(R);
  c.seed = 77;
  return c;
}

void criterion7() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto c0 = run_weak_convergence(weak_config("construct:0", 100000));
  const auto c1 = run_weak_convergence(weak_config("construct:1", 100000));
  auto ci_cfg = weak_config("exp:-1*n^2", 2000);
  ci_cfg.t_check = 5.0;
  const auto ci = run_weak_convergence(ci_cfg);
  const bool ok = verdict_pass(c0, "ks_strictly_decreasing[k=1]") && verdict_pass(c0, "ks_below_threshold[k=1]") &&
                  verdict_pass(c1, "ks_strictly_decreasing[k=1]") && verdict_pass(c1, "ks_below_threshold[k=1]") &&
                  verdict_pass(ci, "p_sigma_le_T_small[k=1]");
  report(7, ok, "c=0: " + verdict_text(c0, "ks_strictly_decreasing[k=1]") + "; c=1: " +
                    verdict_text(c1, "ks_strictly_decreasing[k=1]") + "; Zinf: " +
                    verdict_text(ci, "p_sigma_le_T_small[k=1]") + " (" + f(seconds_since(t0), 3) + " s)");
}

void criterion8() {
  ExperimentConfig as;
  as.strong_mode = "as";
  as.ladder = "geom:4";
  as.speed = "geom:2";
  as.reps = 200;
  as.seed = 8;
  const auto a = run_strong_convergence(as);
  ExperimentConfig l1;
  l1.strong_mode = "l1";
  l1.speed = "construct:0";
  l1.test_levels = {4, 8, 16, 32};
  l1.reps = reps(20000);
  l1.seed = 8;
  const auto l = run_strong_convergence(l1);
  report(8, verdict_pass(a, "as_tail_deviation") && verdict_pass(l, "l1_gap_decreasing"),
         "a.s.: " + verdict_text(a, "as_tail_deviation") + "; L1: " + verdict_text(l, "l1_gap_decreasing"));
}

void criterion9() {
  ExperimentConfig k;
  k.strong_mode = "killed";
  k.speed = "power:1";
  k.test_levels = {2, 4, 8};
  k.reps = reps(100000);
  k.seed = 9;
  const auto r = run_strong_convergence(k);
  report(9, verdict_pass(r, "killed_mean_within_3se"), verdict_text(r, "killed_mean_within_3se"));
}

void criterion11() {
  ExperimentConfig w;
  w.levels = 32;
  w.test_levels = {8, 16, 32};
  w.reps = 1000;
  w.seed = 11;
  ExperimentConfig s;
  s.strong_mode = "l1";
  s.levels = 16;
  s.test_levels = {4, 8, 16};
  s.reps = 500;
  s.seed = 11;
  ExperimentConfig l;
  l.levels = 8;
  l.test_levels = {8};
  l.reps = 400;
  l.seed = 11;
  std::vector<std::string> first;
  bool same = true;
  for (const char* workers : {"1", "4", "16"}) {
    setenv("CSBP_WORKERS", workers, 1);
    const std::vector<std::string> now{run_weak_convergence(w).json, run_strong_convergence(s).json,
                                       run_law_validation(l).json};
    if (first.empty()) first = now;
    else same = same && now == first;
  }
  unsetenv("CSBP_WORKERS");
  report(11, same, std::string("weak, strong and law reports ") +
                       (same ? "byte-identical" : "differ") + " under 1, 4 and 16 workers");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::vector<int>, std::function<void()>>> steps = {
      {{1}, criterion1}, {{4}, criterion4},  {{6}, criterion6}, {{2, 3, 5, 10}, law_criteria},
      {{7}, criterion7}, {{8}, criterion8}, {{9}, criterion9}, {{11}, criterion11}};
  for (const auto& [ids, fn] : steps) {
    try {
      fn();
    } catch (const std::exception& e) {
      for (int id : ids) report(id, false, std::string("exception: ") + e.what());
    }
  }
  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  int failed = 0;
  std::printf("\nsummary\n");
  for (const auto& l : lines) {
    failed += !l.pass;
    std::printf("  criterion %2d %s\n", l.id, l.pass ? "PASS" : "FAIL");
  }
  std::printf("acceptance: %zu criteria, %d failed\n", lines.size(), failed);
  return failed == 0 ? 0 : 1;
}
