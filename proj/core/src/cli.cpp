#include "csbp/cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "csbp/harness.hpp"
#include "csbp/lamperti.hpp"
#include "csbp/speed.hpp"

namespace csbp {

namespace {

using json = nlohmann::ordered_json;

json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + path);
  f << text;
  if (!f) throw ValidationError("failed writing " + path);
}

void emit(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") out << text;
  else write_file(path, text);
}

json verdict_json(const BoundaryVerdict& v) {
  json j;
  j["finite"] = v.finite;
  j["applicable"] = v.applicable;
  j["integral"] = num(v.integral);
  j["shell_ratio"] = num(v.shell_ratio);
  return j;
}

struct CommonModel {
  std::string mechanism = "kind=stable alpha=0.5 k=1";
  std::string ladder = "power:2";
  int levels = 64;
  double theta = kNaN;
};

void add_model_flags(CLI::App* sub, CommonModel& m, bool with_ladder) {
  sub->add_option("--mechanism,-m", m.mechanism, "mechanism spec, e.g. 'kind=stable alpha=0.5 k=1'");
  if (with_ladder) {
    sub->add_option("--ladder", m.ladder, "ladder spec: power:p, geom:r, list:e1,e2,...");
    sub->add_option("--levels", m.levels, "number of ladder levels");
    sub->add_option("--theta", m.theta, "reference point theta (default from the ladder)");
  }
}

// simulate output: rep,level,t,value with a second row at the same t for a jump
struct CsvRow {
  std::size_t rep;
  int level;
  double t, value;
};

std::vector<CsvRow> read_path_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open path file " + path);
  std::string line;
  std::vector<CsvRow> rows;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.rfind("rep", 0) == 0) continue;
    std::stringstream ss(line);
    std::string a, b, c, d;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ',') ||
        !std::getline(ss, d))
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected rep,level,t,value");
    try {
      rows.push_back({std::stoul(a), std::stoi(b), std::stod(c), std::stod(d)});
    } catch (const std::exception&) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  if (rows.empty()) throw ValidationError(path + " has no rows");
  return rows;
}

int cmd_mechanism(const CommonModel& m, const std::vector<double>& lambdas, std::ostream& out) {
  const BranchingMechanism mech = parse_mechanism(m.mechanism);
  json j;
  j["mechanism"] = mech.describe();
  j["net_drift"] = mech.net_drift();
  j["a"] = num(mech.a());
  j["sigma2"] = mech.sigma2();
  j["subordinator"] = mech.is_subordinator();
  j["rho"] = num(mech.rho());
  j["gamma"] = num(mech.gamma());
  const auto rv = mech.rv_index();
  j["rv_index"] = rv ? json(*rv) : json(nullptr);
  const double th = std::isnan(m.theta)
                        ? (std::isfinite(mech.rho()) ? 0.5 * mech.rho() : 1.0)
                        : m.theta;
  if (mech.rho() > 0.0) j["explosion_test"] = verdict_json(mech.explosion_test(th));
  if (std::isfinite(mech.rho())) {
    const double te = std::isnan(m.theta) ? 2.0 * std::max(mech.rho(), 0.5) : m.theta;
    j["extinction_test"] = verdict_json(mech.extinction_test(te));
  }
  json v = json::array();
  for (double l : lambdas) {
    json e;
    e["lambda"] = l;
    e["varphi"] = mech.varphi(l);
    e["varphi_prime"] = num(mech.varphi_prime(l));
    v.push_back(e);
  }
  j["values"] = v;
  out << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_ut(const CommonModel& m, double t, double lam, std::ostream& out) {
  const BranchingMechanism mech = parse_mechanism(m.mechanism);
  const CumulativeRate cr(mech);
  const FlowResult r = cr.solve_ut(t, lam);
  json j;
  j["t"] = t;
  j["lambda"] = lam;
  j["u"] = num(r.u);
  j["log_u"] = num(r.log_u);
  j["residual"] = num(r.residual);
  j["conservative"] = r.conservative;
  out << std::setprecision(17) << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_zeta(const CommonModel& m, double x, int moment, double laplace, double t,
             std::ostream& out) {
  const BranchingMechanism mech = parse_mechanism(m.mechanism);
  const CumulativeRate cr(mech);
  json j;
  j["x"] = x;
  j["explosive"] = cr.explosive();
  auto q = [&](const QuadratureReport& r) {
    json e;
    e["value"] = num(r.value);
    e["error"] = num(r.error);
    e["remainder"] = num(r.remainder);
    e["cross_check"] = num(r.cross_check);
    return e;
  };
  if (moment > 0) j["moment"] = {{"n", moment}, {"result", q(cr.zeta_moment(x, moment))}};
  if (!std::isnan(laplace)) j["laplace"] = {{"lambda", laplace}, {"result", q(cr.zeta_laplace(x, laplace))}};
  if (!std::isnan(t)) j["survival"] = {{"t", t}, {"probability", cr.survival_probability(x, t)}};
  out << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_classify(const CommonModel& m, const std::string& hspec, std::ostream& out) {
  const BranchingMechanism base = parse_mechanism(m.mechanism);
  const LadderFlows flows(EsscherLadder::from_spec(base, m.ladder, m.levels));
  const double th = std::isnan(m.theta) ? default_theta(flows.ladder()) : m.theta;
  const SpeedSequence h = parse_speed(hspec, &flows, th);
  const ClassificationReport r = classify(flows, h, th, m.levels);
  json j;
  j["speed"] = h.label();
  j["class"] = speed_class_name(r.cls);
  j["c_estimate"] = num(r.c_estimate);
  j["c_spread"] = num(r.c_spread);
  j["decided_by"] = r.decided_by;
  j["theta"] = num(r.theta);
  j["N"] = r.N;
  j["n"] = r.n;
  auto arr = [](const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
  };
  j["integral"] = arr(r.integral);
  j["integral_gap"] = arr(r.integral_gap);
  j["rv"] = arr(r.rv);
  j["ratio2899"] = arr(r.ratio2899);
  j["thm1086_partial"] = arr(r.thm1086_partial);
  j["prop0456_partial"] = arr(r.prop0456_partial);
  j["notes"] = r.notes;
  out << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_construct(const CommonModel& m, const std::string& c_arg, const std::string& out_path,
                  std::ostream& out) {
  const BranchingMechanism base = parse_mechanism(m.mechanism);
  const LadderFlows flows(EsscherLadder::from_spec(base, m.ladder, m.levels));
  const double th = std::isnan(m.theta) ? default_theta(flows.ladder()) : m.theta;
  const SpeedSequence h = parse_speed("construct:" + c_arg, &flows, th);
  std::ostringstream os;
  h.write_csv(os);
  emit(out, out_path, os.str());
  return kExitOk;
}

int cmd_simulate(const CommonModel& m, double x0, const SimPolicy& pol, std::size_t reps,
                 const std::string& out_path, std::ostream& out) {
  const BranchingMechanism base = parse_mechanism(m.mechanism);
  const EsscherLadder ladder = EsscherLadder::from_spec(base, m.ladder, m.levels);
  std::ostringstream os;
  os << std::setprecision(17) << "rep,level,t,value\n";
  for (std::size_t r = 0; r < reps; ++r) {
    SimPolicy p = pol;
    p.replication = static_cast<std::uint32_t>(r);
    const CoupledFamilySample fam = simulate_coupled(ladder, x0, p);
    for (std::size_t l = 0; l < fam.levels(); ++l) {
      for (std::size_t k = 0; k < fam.times.size(); ++k) {
        os << r << ',' << fam.index[l] << ',' << fam.times[k] << ',' << fam.left[l][k] << '\n';
        if (fam.right[l][k] != fam.left[l][k])
          os << r << ',' << fam.index[l] << ',' << fam.times[k] << ',' << fam.right[l][k] << '\n';
      }
    }
  }
  emit(out, out_path, os.str());
  return kExitOk;
}

int cmd_transform(const CommonModel& m, const std::string& in_path, const std::string& hspec,
                  double M, const std::string& out_path, std::ostream& out) {
  const BranchingMechanism base = parse_mechanism(m.mechanism);
  const EsscherLadder ladder = EsscherLadder::from_spec(base, m.ladder, m.levels);
  std::unique_ptr<LadderFlows> flows;
  if (hspec.rfind("construct:", 0) == 0) flows = std::make_unique<LadderFlows>(ladder);
  const double th = std::isnan(m.theta) ? default_theta(ladder) : m.theta;
  const SpeedSequence h = parse_speed(hspec, flows.get(), th);
  const auto rows = read_path_csv(in_path);

  std::ostringstream os;
  os << std::setprecision(12) << "rep,level,y,sigma_y,zeta_est,tail_bound,flags\n";
  std::size_t i = 0;
  while (i < rows.size()) {
    const std::size_t rep = rows[i].rep;
    const int level = rows[i].level;
    LevelPath p;
    p.n = level;
    p.eps = level < 0 ? 0.0 : ladder.eps(ladder.position(level));
    p.diffusive = base.sigma2() > 0.0;
    while (i < rows.size() && rows[i].rep == rep && rows[i].level == level) {
      const double t = rows[i].t, v = rows[i].value;
      double after = v;
      if (i + 1 < rows.size() && rows[i + 1].rep == rep && rows[i + 1].level == level &&
          rows[i + 1].t == t) {
        after = rows[i + 1].value;
        ++i;
      }
      if (!p.t.empty() && !(t > p.t.back()))
        throw ValidationError(in_path + ": times must increase within a path");
      p.t.push_back(t);
      p.left.push_back(v);
      p.right.push_back(after);
      ++i;
    }
    const BranchingMechanism& mech = level < 0 ? base : ladder.level(ladder.position(level));
    const double y = level < 0 ? M : 1.0 / h.h(level);
    const PassageRecord pr = first_passage(p, y);
    const ExplosionRecord er = explosion_functional(p, mech, M);
    std::string flags = passage_exit_name(pr.exit);
    if (er.censored) flags += "|censored";
    if (er.tau_finite) flags += "|hit-zero";
    os << rep << ',' << level << ',' << y << ',' << pr.sigma << ',' << er.zeta_estimate << ','
       << er.tail_bound << ',' << flags << '\n';
  }
  emit(out, out_path, os.str());
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Explosion of continuous-state branching processes: flows, speed classes, "
               "coupled simulation and convergence experiments",
               "csbp"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);

  CommonModel model;

  auto* mech = app.add_subcommand("mechanism", "describe a branching mechanism");
  std::vector<double> lambdas{0.5, 1.0, 2.0};
  add_model_flags(mech, model, false);
  mech->add_option("--theta", model.theta, "reference point for the boundary tests");
  mech->add_option("--lambda", lambdas, "points where varphi is evaluated")->delimiter(',');

  auto* ut = app.add_subcommand("ut", "solve the flow u_t(lambda)");
  double t = 1.0, lam = 0.0;
  add_model_flags(ut, model, false);
  ut->add_option("--t", t, "time")->required();
  ut->add_option("--lambda", lam, "initial value lambda >= 0")->required();

  auto* zeta = app.add_subcommand("zeta", "moments and Laplace transform of the explosion time");
  double x = 1.0, zlap = kNaN, zt = kNaN;
  int moment = 0;
  add_model_flags(zeta, model, false);
  zeta->add_option("--x", x, "initial mass");
  zeta->add_option("--moment", moment, "moment order n >= 1");
  zeta->add_option("--laplace", zlap, "Laplace argument");
  zeta->add_option("--t", zt, "also report P_x(zeta > t)");

  auto* cls = app.add_subcommand("classify", "classify a speed sequence h as Z0, Zc or Zinf");
  std::string hspec;
  add_model_flags(cls, model, true);
  cls->add_option("--h,--speed", hspec, "speed: power:p, exp:c*n^p, geom:r, table:<csv>, construct:c")
      ->required();

  auto* cons = app.add_subcommand("construct-h", "build a speed sequence with a prescribed c(h)");
  std::string c_arg, out_path;
  add_model_flags(cons, model, true);
  cons->add_option("--c", c_arg, "target c: a number >= 0 or inf")->required();
  cons->add_option("--out,-o", out_path, "CSV output (default stdout)");

  auto* sim = app.add_subcommand("simulate", "simulate the coupled family on a fixed horizon");
  SimPolicy pol;
  double sx0 = 1.0;
  std::size_t sreps = 1;
  std::string zero_mode = "grid", small_mode = "compensate-mean";
  add_model_flags(sim, model, true);
  sim->add_option("--x0", sx0, "initial value");
  sim->add_option("--T", pol.T, "Levy-time horizon");
  sim->add_option("--dt", pol.dt, "grid step");
  sim->add_option("--delta", pol.delta, "small-jump cutoff");
  sim->add_option("--seed", pol.seed, "master seed");
  sim->add_option("--reps", sreps, "number of replications");
  sim->add_option("--zero", zero_mode, "zero detection: grid or bridge")
      ->check(CLI::IsMember({"grid", "bridge"}));
  sim->add_option("--small-jumps", small_mode, "compensate-mean or gaussian-approx")
      ->check(CLI::IsMember({"compensate-mean", "gaussian-approx"}));
  sim->add_option("--out,-o", out_path, "CSV output (default stdout)");

  auto* tr = app.add_subcommand("transform", "Lamperti-transform simulated paths");
  std::string in_path, thspec = "power:1";
  double tM = 1e8;
  add_model_flags(tr, model, true);
  tr->add_option("--in,-i", in_path, "CSV written by simulate")->required();
  tr->add_option("--h,--speed", thspec, "speed sequence for the passage levels 1/h(n)");
  tr->add_option("--M", tM, "explosion threshold");
  tr->add_option("--out,-o", out_path, "CSV output (default stdout)");

  auto* ex = app.add_subcommand("experiment", "run weak, strong or law experiments");
  std::string kind, config_path, csv_path;
  std::vector<std::string> sets;
  ex->add_option("kind", kind, "weak | strong | law")
      ->required()
      ->check(CLI::IsMember({"weak", "strong", "law"}));
  ex->add_option("--config,-c", config_path, "INI config file");
  ex->add_option("--set", sets, "override a setting: key=value (repeatable)");
  static const std::vector<std::pair<std::string, std::string>> shortcuts = {
      {"--seed", "seed"},       {"--reps", "reps"},     {"--mechanism", "mechanism"},
      {"--ladder", "ladder"},   {"--levels", "levels"}, {"--h", "speed"},
      {"--x0", "x0"},           {"--T", "T"},           {"--M", "M"},
      {"--eta", "eta"},         {"--delta", "delta"},   {"--dt", "dt"},
      {"--mode", "strong_mode"}, {"--out", "out_json"}, {"--csv", "out_csv"}};
  std::map<std::string, std::string> shortcut_values;
  std::map<std::string, CLI::Option*> shortcut_opts;
  for (const auto& [flag, key] : shortcuts)
    shortcut_opts[key] = ex->add_option(flag, shortcut_values[key], "setting '" + key + "'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (const auto* s : app.get_subcommands())
      if (s->parsed()) failing = s;
    err << failing->help();
    return kExitValidation;
  }

  try {
    if (mech->parsed()) return cmd_mechanism(model, lambdas, out);
    if (ut->parsed()) return cmd_ut(model, t, lam, out);
    if (zeta->parsed()) {
      if (moment <= 0 && std::isnan(zlap) && std::isnan(zt)) moment = 1;
      return cmd_zeta(model, x, moment, zlap, zt, out);
    }
    if (cls->parsed()) return cmd_classify(model, hspec, out);
    if (cons->parsed()) return cmd_construct(model, c_arg, out_path, out);
    if (sim->parsed()) {
      pol.zero = zero_mode == "bridge" ? ZeroDetection::bridge : ZeroDetection::grid;
      pol.mode = small_mode == "gaussian-approx" ? SmallJumpMode::gaussian_approx
                                                 : SmallJumpMode::compensate_mean;
      if (sreps < 1) throw ValidationError("reps must be >= 1");
      return cmd_simulate(model, sx0, pol, sreps, out_path, out);
    }
    if (tr->parsed()) return cmd_transform(model, in_path, thspec, tM, out_path, out);
    if (ex->parsed()) {
      Settings s;
      if (!config_path.empty()) s = load_settings(config_path);
      for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
          throw ValidationError("--set expects key=value, got '" + kv + "'");
        s[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      for (const auto& [key, opt] : shortcut_opts)
        if (opt->count() > 0) s[key] = shortcut_values[key];
      const ExperimentConfig cfg = ExperimentConfig::from_settings(s);
      ExperimentReport rep;
      if (kind == "weak") rep = run_weak_convergence(cfg);
      else if (kind == "strong") rep = run_strong_convergence(cfg);
      else rep = run_law_validation(cfg);
      emit(out, cfg.out_json, rep.json);
      if (!cfg.out_csv.empty()) write_file(cfg.out_csv, rep.csv);
      for (const auto& v : rep.verdicts)
        err << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << v.detail << "\n";
      if (!rep.valid) err << "report flagged invalid\n";
      return rep.passed() ? kExitOk : kExitVerdict;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    err << "error: bad value (" << e.what() << ")\n";
    return kExitValidation;
  } catch (const std::out_of_range& e) {
    err << "error: value out of range (" << e.what() << ")\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  err << app.help();
  return kExitValidation;
}

int cli_main(int argc, const char* const* argv) { return cli_main(argc, argv, std::cout, std::cerr); }

}  // namespace csbp
