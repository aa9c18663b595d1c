#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <exception>
#include <thread>
#include <vector>

#include "csbp/config.hpp"

namespace csbp {

struct Verdict {
  std::string name;
  std::string criterion;
  bool pass = false;
  std::string detail;
};

struct ExperimentReport {
  std::string kind;
  bool valid = true;
  std::vector<Verdict> verdicts;
  std::string json;  // the machine-readable report, deterministic for fixed config and seed
  std::string csv;

  bool passed() const;
};

ExperimentReport run_weak_convergence(const ExperimentConfig& cfg);
ExperimentReport run_strong_convergence(const ExperimentConfig& cfg);
ExperimentReport run_law_validation(const ExperimentConfig& cfg);

// Worker count from CSBP_WORKERS (default 1).
unsigned worker_count();

// Runs fn(rep, worker) for rep in [0, R) on `workers` threads; results are
// stored by index so the outcome does not depend on scheduling.
template <class Result, class Fn>
std::vector<Result> run_replications(std::size_t R, unsigned workers, Fn&& fn) {
  std::vector<Result> out(R);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(R, 1))));
  if (workers == 1) {
    for (std::size_t r = 0; r < R; ++r) out[r] = fn(r, 0u);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t r = w; r < R; r += workers) out[r] = fn(r, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace csbp
