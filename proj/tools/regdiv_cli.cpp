// regdiv: optimal dividend barriers for regime-switching reserves.
//
//   regdiv solve    --model m.json [--out dir] [--h 1e-3] [--tol 1e-7]
//   regdiv tables   [--out dir] [--h 1e-3] [--tol 1e-7]
//   regdiv verify   --model m.json [--policy p.json] [--paths 1e5] [--probe-points 0.5@0,1@1]
//   regdiv simulate --model m.json --policy p.json [--paths 1e6] [--dt 1e-4] [--seed 42]
//
// Exit codes: 0 ok, 1 input error, 2 no convergence, 3 verification failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "regdiv/regdiv.hpp"

namespace fs = std::filesystem;
using namespace regdiv;

namespace {

enum Exit { kOk = 0, kInput = 1, kNoConvergence = 2, kVerifyFailed = 3 };

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::Parse:
    case ErrorCode::NonPositiveVolatility:
    case ErrorCode::NonPositiveDiscount:
    case ErrorCode::BadGeneratorRowSum:
    case ErrorCode::NegativeOffDiagonal:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::DegenerateVolatility:
    case ErrorCode::OutOfRange:
    case ErrorCode::InvalidBand:
    case ErrorCode::BarrierOutOfRange:
      return kInput;
    default:
      return kNoConvergence;
  }
}

struct RunConfig {
  std::string command;
  std::string model_path;
  std::string out_dir = ".";
  double h = 1e-3;
  double tol = 1e-7;
  double dt = 1e-4;
  double paths = 0;  // 0: command default
  std::uint64_t seed = 42;
  std::string policy_path;
  std::string probe_points;
  std::size_t dump_paths = 0;

  std::size_t path_count(std::size_t fallback) const {
    return paths > 0 ? static_cast<std::size_t>(std::llround(paths)) : fallback;
  }

  json to_json() const {
    json j{{"command", command}, {"h", h}, {"tol", tol}, {"dt", dt}, {"seed", seed}};
    if (!model_path.empty()) j["model"] = model_path;
    if (paths > 0) j["paths"] = path_count(0);
    if (!policy_path.empty()) j["policy"] = policy_path;
    if (!probe_points.empty()) j["probe_points"] = probe_points;
    return j;
  }
};

void check_ranges(const RunConfig& c) {
  if (c.h < 1e-5 || c.h > 1e-2) throw Error(ErrorCode::OutOfRange, "--h must lie in [1e-5, 1e-2]");
  if (!(c.tol > 0.0)) throw Error(ErrorCode::OutOfRange, "--tol must be positive");
  if (!(c.dt > 0.0) || c.dt > 0.1) throw Error(ErrorCode::OutOfRange, "--dt must lie in (0, 0.1]");
  if (c.paths != 0 && (c.paths < 1 || c.paths > 1e8 || c.paths != std::floor(c.paths)))
    throw Error(ErrorCode::OutOfRange, "--paths must be an integer in [1, 1e8]");
}

// "0.5@0,1@1" -> {(0.5, 0), (1, 1)}; a bare number means regime 0.
std::vector<ProbePoint> parse_probes(const std::string& s, std::size_t regimes) {
  std::vector<ProbePoint> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    ProbePoint p;
    const auto at = item.find('@');
    try {
      std::size_t used = 0;
      p.x = std::stod(item.substr(0, at), &used);
      if (used != (at == std::string::npos ? item.size() : at)) throw std::invalid_argument(item);
      if (at != std::string::npos) p.regime = std::stoul(item.substr(at + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::Parse, "bad probe point '" + item + "' (expected x or x@regime)");
    }
    if (!(p.x >= 0.0) || p.regime >= regimes) throw Error(ErrorCode::OutOfRange, "probe point out of range: " + item);
    out.push_back(p);
  }
  return out;
}

std::vector<ProbePoint> default_probes(std::size_t regimes) {
  std::vector<ProbePoint> out;
  for (std::size_t i = 0; i < regimes; ++i)
    for (double x : {0.25, 0.5, 1.0}) out.push_back({x, i});
  return out;
}

fs::path out_file(const RunConfig& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / name;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw Error(ErrorCode::Parse, "cannot write " + p.string());
  f << text;
}

SolveOptions solve_options(const RunConfig& c) {
  SolveOptions o;
  o.h = c.h;
  o.tol = c.tol;
  return o;
}

json solution_json(const RunConfig& cfg, const RegimeModel& m, const ModelSolution& s) {
  json j{{"config", cfg.to_json()},
         {"model", to_json(m)},
         {"case", to_string(s.drift)},
         {"method", to_string(s.method)},
         {"policy", to_json(s.policy)},
         {"barriers", s.policy.barriers}};
  if (!s.policy.liquidation.empty()) j["liquidation"] = s.policy.liquidation;
  if (s.fixed) {
    j["smooth_fit"] = s.fixed->smooth_fit;
    j["report"] = to_json(s.fixed->report);
  }
  if (s.positive) j[s.method == Method::BarrierPair ? "barrier_pair" : "closed_form"] = to_json(*s.positive);
  if (s.negative) j["closed_form"] = to_json(*s.negative);
  if (s.everywhere) j["closed_form"] = to_json(*s.everywhere);
  if (m.size() == 1 && s.drift == DriftCase::AllPositive) {
    const auto& st = m.states[0];
    j["classical_barrier"] = single_regime_barrier(st.mu, st.sigma, st.discount);
  }
  if (!s.notes.empty()) j["notes"] = s.notes;
  return j;
}

int cmd_solve(const RunConfig& cfg) {
  const RegimeModel m = load_model(cfg.model_path);
  const auto s = solve_model(m, solve_options(cfg));
  for (const auto& n : s.notes) std::cerr << "note: " << n << "\n";
  write_text(out_file(cfg, "solution.json"), dump(solution_json(cfg, m, s)));
  std::ofstream csv(out_file(cfg, "value.csv"));
  write_grid_csv(s.value, csv);
  std::cout << to_string(s.drift) << " via " << to_string(s.method) << ": barriers";
  for (double b : s.policy.barriers) std::cout << ' ' << fmt9(b);
  if (!s.policy.liquidation.empty()) {
    std::cout << ", liquidation";
    for (double d : s.policy.liquidation) std::cout << ' ' << fmt9(d);
  }
  std::cout << "\n";
  return kOk;
}

// The comparative-statics parameter set and its one-at-a-time variations.
RegimeModel table_base() { return make_two_regime({0.06, 0.24, 0.04}, -2.0, {0.08, 0.30, 0.05}, -3.0); }

int cmd_tables(const RunConfig& cfg) {
  struct Row {
    const char* param;
    double value;
  };
  const std::vector<Row> rows = {{"mu0", 0.04},   {"mu0", 0.08},   {"mu0", 0.38},  {"mu0", 1.00},
                                 {"sigma0", 0.16}, {"sigma0", 0.20}, {"sigma0", 0.28}, {"sigma0", 0.32},
                                 {"q00", -4.0},   {"q00", -3.0},   {"q00", -1.0},  {"q00", -0.01},
                                 {"r0", 0.02},    {"r0", 0.03},    {"r0", 0.05},   {"r0", 0.06}};
  std::ofstream csv(out_file(cfg, "tables.csv"));
  csv << "varied_param,value,a0_star,b0_star,b1_star\n";
  bool failed = false;
  for (const auto& row : rows) {
    RegimeModel raw = table_base();
    const std::string p = row.param;
    if (p == "mu0") raw.states[0].mu = row.value;
    if (p == "sigma0") raw.states[0].sigma = row.value;
    if (p == "r0") raw.states[0].discount = row.value;
    if (p == "q00") raw.generator[0] = {row.value, -row.value};
    const RegimeModel m = validate(raw);
    const auto& s0 = m.states[0];
    const double a0 = single_regime_barrier(s0.mu, s0.sigma, s0.discount);
    std::string b0 = "NA", b1 = "NA";
    try {
      const auto r = solve(m, solve_options(cfg));
      b0 = fmt9(r.barriers[0]);
      b1 = fmt9(r.barriers[1]);
    } catch (const Error& e) {
      failed = true;
      std::cerr << p << "=" << row.value << ": " << e.what() << "\n";
    }
    csv << p << ',' << fmt9(row.value) << ',' << fmt9(a0) << ',' << b0 << ',' << b1 << '\n';
    std::cout << p << '=' << fmt9(row.value) << "  a0*=" << fmt9(a0) << "  b*=(" << b0 << ", " << b1 << ")\n";
  }
  return failed ? kNoConvergence : kOk;
}

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

double function_value(const ModelSolution& s, std::size_t i, double x) {
  if (s.negative) return s.negative->evaluate(x, i);
  if (s.everywhere) return s.everywhere->evaluate(x, i);
  if (s.positive && s.method == Method::BarrierPair) return s.positive->evaluate(x, i);
  return s.value(i, x);
}

int cmd_verify(const RunConfig& cfg) {
  const RegimeModel m = load_model(cfg.model_path);
  const auto s = solve_model(m, solve_options(cfg));
  std::vector<Check> checks;
  auto add = [&](std::string name, bool ok, double v, double thr, std::string detail = {}) {
    checks.push_back({std::move(name), ok, v, thr, std::move(detail)});
  };

  // The function under test: the solver output, or the value of a given policy.
  GridFunction V = s.value;
  BarrierPolicy policy = s.policy;
  std::function<double(std::size_t, double)> value_at = [&](std::size_t i, double x) { return function_value(s, i, x); };
  if (!cfg.policy_path.empty()) {
    policy = load_policy(cfg.policy_path);
    detail::check_policy(m, policy);
    bool liq = false;
    for (std::size_t i = 0; i < m.size(); ++i) liq = liq || policy.d(i) > 0.0;
    const double top = *std::max_element(policy.barriers.begin(), policy.barriers.end());
    const double cap = std::max(V.x_cap(), 1.5 * top + cfg.h);
    V = liq ? liquidation_strategy_value(m, policy, 1e-10, cfg.h, cap).value : barrier_value(policy, m, 1e-10, cfg.h, cap).value;
    value_at = [&](std::size_t i, double x) { return V(i, x); };
  }

  const auto hjb = hjb_residual(V, m);
  add("hjb_residual", hjb.sup <= 5e-3, hjb.sup, 5e-3);

  if (s.drift == DriftCase::AllPositive && cfg.policy_path.empty()) {
    double min_slope = INFINITY;
    for (const auto& v : V.values)
      for (std::size_t k = 0; k + 1 < v.size(); ++k) min_slope = std::min(min_slope, (v[k + 1] - v[k]) / V.h);
    const double bend = max_second_difference(V);
    add("concavity", bend <= 1e-8, bend, 1e-8);
    add("unit_slope_floor", min_slope >= 1.0 - 1e-6, min_slope, 1.0 - 1e-6);
    double sf = 0.0;
    for (double x : s.fixed->smooth_fit) sf = std::max(sf, std::abs(x));
    add("smooth_fit", sf <= 1e-3, sf, 1e-3);
    if (s.positive) {
      double db = 0.0, dv = 0.0;
      for (std::size_t i = 0; i < 2; ++i) db = std::max(db, std::abs(s.positive->barriers[i] - s.policy.barriers[i]));
      const double top = std::max(s.policy.barriers[0], s.policy.barriers[1]);
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t k = 0; k * V.h <= top; ++k)
          dv = std::max(dv, std::abs(s.positive->evaluate(k * V.h, i) - V.values[i][k]));
      const double bt = std::max(2.0 * cfg.h, 2e-3);
      add("closed_form_barriers", db <= bt, db, bt);
      add("closed_form_values", dv <= 1e-3, dv, 1e-3);
    }
  }
  if (s.drift == DriftCase::MixedSign && cfg.policy_path.empty() && s.method != Method::LiquidateEverywhere) {
    // The negative-drift regime is not concave: V'' > 0 somewhere near 0.
    const std::size_t neg = m.states[0].mu <= 0.0 ? 0 : 1;
    double bend = -INFINITY;
    const auto& v = V.values[neg];
    for (std::size_t k = 1; k + 1 < v.size(); ++k) bend = std::max(bend, (v[k + 1] - 2 * v[k] + v[k - 1]) / (V.h * V.h));
    add("non_concavity", bend > 1e-4, bend, 1e-4, "expects V'' > 0 somewhere in the negative-drift regime");
  }

  SimConfig sc;
  sc.dt = cfg.dt;
  sc.seed = cfg.seed;
  sc.paths = cfg.path_count(100000);
  const auto probes = cfg.probe_points.empty() ? default_probes(m.size()) : parse_probes(cfg.probe_points, m.size());
  json mc = json::array();
  for (const auto& p : probes) {
    const auto e = simulate_liquidation_dividend(m, policy, p.x, p.regime, sc);
    const double v = value_at(p.regime, p.x);
    const double z = e.stderr_ > 0 ? std::abs(e.mean - v) / e.stderr_ : (e.mean == v ? 0.0 : INFINITY);
    add("monte_carlo x=" + fmt9(p.x) + " regime=" + std::to_string(p.regime), z <= 3.0, z, 3.0,
        "estimate " + fmt9(e.mean) + " +- " + fmt9(e.stderr_) + " vs " + fmt9(v));
  }

  bool all = true;
  json out = json::array();
  for (const auto& c : checks) {
    all = all && c.passed;
    json j{{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"threshold", c.threshold}};
    if (!c.detail.empty()) j["detail"] = c.detail;
    out.push_back(j);
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  value=" << fmt9(c.value)
              << "  threshold=" << fmt9(c.threshold) << (c.detail.empty() ? "" : "  (" + c.detail + ")") << "\n";
  }
  json report{{"config", cfg.to_json()},   {"model", to_json(m)},  {"case", to_string(s.drift)},
              {"method", to_string(s.method)}, {"policy", to_json(policy)}, {"checks", out},
              {"passed", all}};
  if (!s.notes.empty()) report["notes"] = s.notes;
  write_text(out_file(cfg, "verify.json"), dump(report));
  return all ? kOk : kVerifyFailed;
}

int cmd_simulate(const RunConfig& cfg) {
  const RegimeModel m = load_model(cfg.model_path);
  const BarrierPolicy policy = load_policy(cfg.policy_path);
  detail::check_policy(m, policy);
  SimConfig sc;
  sc.dt = cfg.dt;
  sc.seed = cfg.seed;
  sc.paths = cfg.path_count(1000000);
  const auto probes = cfg.probe_points.empty() ? std::vector<ProbePoint>{{1.0, 0}} : parse_probes(cfg.probe_points, m.size());
  json est = json::array();
  for (const auto& p : probes) {
    const auto e = simulate_liquidation_dividend(m, policy, p.x, p.regime, sc);
    json j = to_json(e);
    j["x"] = p.x;
    j["regime"] = p.regime;
    est.push_back(j);
    std::cout << "x=" << fmt9(p.x) << " regime=" << p.regime << "  mean=" << fmt9(e.mean) << "  stderr=" << fmt9(e.stderr_)
              << "\n";
  }
  json report{{"config", cfg.to_json()}, {"sim", to_json(sc)}, {"model", to_json(m)}, {"policy", to_json(policy)},
              {"estimates", est}};
  write_text(out_file(cfg, "estimate.json"), dump(report));
  if (cfg.dump_paths > 0) {
    std::ofstream f(out_file(cfg, "paths.csv"));
    dump_paths(m, policy, probes.front().x, probes.front().regime, sc, cfg.dump_paths, f);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal dividend barriers for regime-switching reserves"};
  app.require_subcommand(1);
  RunConfig cfg;

  // "--h" is the grid step, so help is reachable only as --help.
  app.set_help_flag("--help", "print this help and exit");
  auto common = [&](CLI::App* sub, bool model) {
    sub->set_help_flag("--help", "print this help and exit");
    if (model) sub->add_option("--model", cfg.model_path, "model JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
    sub->add_option("--h", cfg.h, "grid step")->capture_default_str();
    sub->add_option("--tol", cfg.tol, "outer tolerance of the two-sided iteration")->capture_default_str();
  };
  auto sim = [&](CLI::App* sub) {
    sub->add_option("--dt", cfg.dt, "smallest simulation step")->capture_default_str();
    sub->add_option("--paths", cfg.paths, "number of simulated paths");
    sub->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    sub->add_option("--probe-points", cfg.probe_points, "comma-separated x or x@regime");
  };

  auto* solve_cmd = app.add_subcommand("solve", "solve a model, write solution.json and value.csv");
  common(solve_cmd, true);
  auto* tables_cmd = app.add_subcommand("tables", "regenerate the sensitivity tables as tables.csv");
  common(tables_cmd, false);
  auto* verify_cmd = app.add_subcommand("verify", "check a solution (or a --policy) and write verify.json");
  common(verify_cmd, true);
  sim(verify_cmd);
  verify_cmd->add_option("--policy", cfg.policy_path, "policy JSON to verify instead of the optimum")
      ->check(CLI::ExistingFile);
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte-Carlo value of a policy, written to estimate.json");
  simulate_cmd->set_help_flag("--help", "print this help and exit");
  simulate_cmd->add_option("--model", cfg.model_path, "model JSON file")->required()->check(CLI::ExistingFile);
  simulate_cmd->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
  simulate_cmd->add_option("--policy", cfg.policy_path, "policy JSON")->required()->check(CLI::ExistingFile);
  simulate_cmd->add_option("--dump-paths", cfg.dump_paths, "also write the first N paths to paths.csv");
  sim(simulate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInput;
  }

  try {
    check_ranges(cfg);
    cfg.command = app.get_subcommands().front()->get_name();
    if (*solve_cmd) return cmd_solve(cfg);
    if (*tables_cmd) return cmd_tables(cfg);
    if (*verify_cmd) return cmd_verify(cfg);
    if (*simulate_cmd) return cmd_simulate(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  }
  return kOk;
}
