#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "csbp/cli.hpp"
#include "csbp/harness.hpp"

using namespace csbp;

namespace {
struct Run {
  int code;
  std::string out, err;
};
Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "csbp");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}
void write(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}
const char* kSmallWeak =
    "[model]\nmechanism = kind=stable alpha=0.5 k=1\nladder = power:2\nlevels = 16\n"
    "speed = construct:0\n[sim]\nreps = 300\neta = 0.01\n[weak]\ntest_levels = 4,8,16\n";
}  // namespace

TEST_CASE("config parsing") {
  write("cfg_ok.ini", kSmallWeak);
  const auto s = load_settings("cfg_ok.ini");
  const auto c = ExperimentConfig::from_settings(s);
  CHECK(c.levels == 16);
  CHECK(c.reps == 300);
  CHECK(c.test_levels == std::vector<int>{4, 8, 16});
  CHECK(c.mechanism == "kind=stable alpha=0.5 k=1");
  CHECK_NOTHROW(c.validate());
  CHECK_THROWS_AS(load_settings("does_not_exist.ini"), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::from_settings({{"wibble", "1"}}), ValidationError);
  CHECK_THROWS_AS(ExperimentConfig::from_settings({{"reps", "ten"}}), ValidationError);
  auto small = c;
  small.reps = 99;
  CHECK_THROWS_AS(small.validate(), ValidationError);
  auto deep = c;
  deep.test_levels = {32};
  CHECK_THROWS_AS(deep.validate(), ValidationError);
}

TEST_CASE("cli: flows and classification") {
  auto r = run({"ut", "--t", "1", "--lambda", "1"});
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["u"].get<double>() == doctest::Approx(2.25).epsilon(1e-10));
  r = run({"classify", "--h", "exp:-0.5*n"});
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["class"] == "Zc");
  r = run({"zeta", "--x", "1", "--moment", "2"});
  REQUIRE(r.code == 0);
  r = run({"mechanism", "-m", "kind=quadratic a=-1 sigma2=2"});
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["rho"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("cli: exit codes") {
  CHECK(run({"ut", "--t", "1", "--lambda", "1", "--bogus"}).code == 1);
  const auto u = run({"--frobnicate"});
  CHECK(u.code == 1);
  CHECK(u.err.find("Usage") != std::string::npos);
  const auto m = run({"experiment", "weak", "--config", "no/such/file.cfg"});
  CHECK(m.code == 1);
  CHECK(m.err.find("no/such/file.cfg") != std::string::npos);
  CHECK(run({"mechanism", "-m", "kind=stable alpha=3"}).code == 1);
  CHECK(run({"experiment", "strong", "--set", "strong_mode=sideways"}).code == 1);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("cli: construct-h output reads back as a table speed") {
  auto r = run({"construct-h", "--c", "1", "--levels", "32", "-o", "h_c1.csv"});
  REQUIRE(r.code == 0);
  r = run({"classify", "--levels", "32", "--h", "table:h_c1.csv"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["class"] == "Zc");
  CHECK(j["c_estimate"].get<double>() == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("cli: simulate then transform") {
  auto r = run({"simulate", "--levels", "3", "--T", "50", "--delta", "1e-3", "--reps", "2", "-o", "paths.csv"});
  REQUIRE(r.code == 0);
  r = run({"transform", "--levels", "3", "-i", "paths.csv", "--h", "power:1", "--M", "1e3", "-o", "records.csv"});
  REQUIRE(r.code == 0);
  std::ifstream f("records.csv");
  std::string header, line;
  std::getline(f, header);
  CHECK(header == "rep,level,y,sigma_y,zeta_est,tail_bound,flags");
  int rows = 0;
  while (std::getline(f, line)) ++rows;
  CHECK(rows == 8);  // 2 reps x (3 levels + limit)
  CHECK(run({"transform", "-i", "missing_paths.csv"}).code == 1);
}

TEST_CASE("experiment reports are deterministic across worker counts") {
  write("cfg_det.ini", kSmallWeak);
  std::string first;
  for (const char* w : {"1", "3"}) {
    setenv("CSBP_WORKERS", w, 1);
    const auto r = run({"experiment", "weak", "--config", "cfg_det.ini", "--seed", "7"});
    CHECK((r.code == 0 || r.code == 3));
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["seed"] == 7);
    CHECK(j["schema_version"] == 1);
    if (first.empty()) first = r.out;
    else CHECK(r.out == first);
  }
  unsetenv("CSBP_WORKERS");
  setenv("CSBP_WORKERS", "zero", 1);
  CHECK(run({"experiment", "weak", "--config", "cfg_det.ini"}).code == 1);
  unsetenv("CSBP_WORKERS");
}

TEST_CASE("weak report accounts for all mass") {
  write("cfg_mass.ini", kSmallWeak);
  const auto r = run({"experiment", "weak", "--config", "cfg_mass.ini"});
  const auto j = nlohmann::json::parse(r.out);
  for (const auto& l : j["levels"]) {
    CHECK(l["mass_total"].get<double>() == doctest::Approx(1.0));
    CHECK(l["ks"].get<double>() >= 0.0);
    CHECK(l["ks"].get<double>() <= 1.0);
    double prev = 0.0;
    for (const auto& g : l["ecdf_grid"]) {
      CHECK(g[1].get<double>() >= prev);
      prev = g[1].get<double>();
    }
  }
  CHECK(j["verdicts"].size() == 2);
  for (const auto& v : j["verdicts"]) CHECK_FALSE(v["criterion"].get<std::string>().empty());
}
