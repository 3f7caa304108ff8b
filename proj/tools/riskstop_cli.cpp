// riskstop: risk-sensitive optimal stopping of finite CTMCs.
//
// Subcommands consume one JSON config (see configs/ for examples) and
// emit a JSON report carrying the fully resolved config, plus optional
// CSV tables. Exit codes: 0 success, 1 invalid input, 2 solver
// non-convergence, 3 a requested property check failed.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "riskstop/exp_solver.hpp"
#include "riskstop/grid_solver.hpp"
#include "riskstop/house_selling.hpp"
#include "riskstop/io.hpp"
#include "riskstop/ola.hpp"
#include "riskstop/risk_compare.hpp"
#include "riskstop/simulator.hpp"

namespace rs = riskstop;
using nlohmann::json;

namespace {

struct CliArgs {
  std::string config_path;
  std::string out_path;
  std::string csv_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<long> n_paths;
};

json make_report(const char* tool, const rs::ParsedConfig& cfg) {
  json rep;
  rep["tool"] = tool;
  rep["version"] = rs::kVersion;
  rep["config"] = json::parse(rs::resolved_config_json(cfg));
  return rep;
}

void emit(const json& rep, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << rep.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw rs::Error("FILE_ERROR", "cannot write " + out_path);
  out << rep.dump(2) << "\n";
}

rs::ParsedConfig load(const CliArgs& args) {
  rs::ParsedConfig cfg = rs::load_config(args.config_path);
  if (args.seed) cfg.sim.seed = *args.seed;
  if (args.threads) cfg.sim.threads = *args.threads;
  if (args.n_paths) cfg.sim.n_paths = *args.n_paths;
  return cfg;
}

rs::McOptions mc_options(const rs::ParsedConfig& cfg) {
  rs::McOptions opt;
  opt.n_paths = cfg.sim.n_paths;
  opt.seed = cfg.sim.seed;
  opt.max_jumps = cfg.sim.max_jumps;
  opt.threads = cfg.sim.threads;
  if (!cfg.house_alpha.empty())
    opt.kernel = rs::house_offer_kernel(cfg.house_alpha);
  return opt;
}

void write_csv(const std::string& path, const rs::StoppingProblem& p,
               const rs::ValueField& v, const rs::StoppingRule& rule) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw rs::Error("FILE_ERROR", "cannot write " + path);
  rs::write_value_csv(out, p, v, rule);
}

json field_row_at_zero(const rs::ValueField& v) {
  json arr = json::array();
  for (int i = 0; i < v.num_states(); ++i) arr.push_back(v.at(i, 0));
  return arr;
}

json rule_row_at_zero(const rs::StoppingRule& r) {
  json arr = json::array();
  for (int i = 0; i < r.num_states(); ++i) {
    double w = r.wait(i, 0);
    if (w == rs::kNever)
      arr.push_back("inf");
    else
      arr.push_back(w);
  }
  return arr;
}

json diag_json(const rs::SweepDiagnostics& d, const rs::CtmcModel& m) {
  json j;
  j["truncation_warning"] = d.truncation_warning;
  json names = json::array();
  for (int i : d.boundary_argmax_states) names.push_back(m.name(i));
  j["boundary_argmax_states"] = names;
  return j;
}

int cmd_validate(const CliArgs& args) {
  rs::ParsedConfig cfg = load(args);
  json rep = make_report("validate", cfg);
  rs::StoppingProblem p = cfg.build_problem();
  const rs::CtmcModel& m = p.model();
  json res;
  res["ok"] = true;
  res["num_states"] = m.num_states();
  res["states"] = m.state_names();
  json rates = json::array();
  json caps = json::array();
  for (int i = 0; i < m.num_states(); ++i) {
    rates.push_back(m.exit_rate(i));
    caps.push_back(rs::fmt_double(p.domain_cap(i)));
  }
  res["exit_rates"] = rates;
  res["stop_domain_caps"] = caps;
  rep["result"] = res;
  emit(rep, args.out_path);
  return 0;
}

int cmd_solve_finite(const CliArgs& args) {
  rs::ParsedConfig cfg = load(args);
  if (cfg.solver.stages < 1)
    throw rs::Error("SCHEMA_ERROR", "/solver/stages: must be >= 1");
  json rep = make_report("solve-finite", cfg);
  rs::StoppingProblem p = cfg.build_problem();
  rs::TimeGrid grid(cfg.grid.t_max, cfg.grid.dt);
  rs::FiniteSolution sol =
      rs::solve_finite(p, grid, cfg.solver.stages, cfg.solver.refine_argmax);
  json res;
  res["stages"] = cfg.solver.stages;
  res["diagnostics"] = diag_json(sol.diag, p.model());
  json per_stage = json::array();
  for (const rs::ValueField& v : sol.stages)
    per_stage.push_back(field_row_at_zero(v));
  res["value_at_zero_by_stage"] = per_stage;
  res["final_wait_at_zero"] = rule_row_at_zero(sol.rules.back());
  rep["result"] = res;
  write_csv(args.csv_path, p, sol.stages.back(), sol.rules.back());
  emit(rep, args.out_path);
  return 0;
}

int cmd_solve_infinite(const CliArgs& args) {
  rs::ParsedConfig cfg = load(args);
  json rep = make_report("solve-infinite", cfg);
  rs::StoppingProblem p = cfg.build_problem();
  rs::TimeGrid grid(cfg.grid.t_max, cfg.grid.dt);
  rs::SolveOptions opt{cfg.solver.tol, cfg.solver.max_iter,
                       cfg.solver.refine_argmax};
  rs::InfiniteSolution sol = rs::solve_infinite(p, grid, opt);
  json res;
  res["iterations"] = sol.iterations;
  res["residual"] = sol.residual;
  res["diagnostics"] = diag_json(sol.diag, p.model());
  res["value_at_zero"] = field_row_at_zero(sol.value);
  res["wait_at_zero"] = rule_row_at_zero(sol.rule);
  rep["result"] = res;
  write_csv(args.csv_path, p, sol.value, sol.rule);
  emit(rep, args.out_path);
  return 0;
}

int cmd_solve_exp(const CliArgs& args) {
  rs::ParsedConfig cfg = load(args);
  json rep = make_report("solve-exp", cfg);
  rs::StoppingProblem p = cfg.build_problem();
  rs::ExpSolution sol =
      rs::solve_exp_infinite(p, cfg.exp.tol, cfg.exp.max_iter);
  json res;
  res["w"] = sol.w;
  res["iterations"] = sol.iterations;
  res["residual"] = sol.residual;
  json stop_names = json::array();
  for (int i = 0; i < p.num_states(); ++i)
    if (sol.stop[i]) stop_names.push_back(p.model().name(i));
  res["stop_set"] = stop_names;
  res["stop"] = sol.stop;
  res["drift"] = sol.drift;
  rep["result"] = res;
  if (!args.csv_path.empty()) {
    std::ofstream out(args.csv_path);
    if (!out) throw rs::Error("FILE_ERROR", "cannot write " + args.csv_path);
    rs::write_exp_csv(out, p, sol.w, sol.stop);
  }
  emit(rep, args.out_path);
  return 0;
}

int cmd_ola(const CliArgs& args) {
  rs::ParsedConfig cfg = load(args);
  json rep = make_report("ola", cfg);
  rs::StoppingProblem p = cfg.build_problem();
  json res;
  if (cfg.ola.grid_method) {
    rs::OlaGridOptions gopt{cfg.ola.theta_step, cfg.ola.horizon_factor};
    json s0 = json::array();
    json sinf = json::array();
    for (int i = 0; i < p.num_states(); ++i) {
      rs::OlaMembership mem =
          rs::ola_membership_grid(p, i, cfg.ola.t, gopt);
      s0.push_back(mem.in_s0);
      sinf.push_back(mem.in_s_inf);
    }
    res["t"] = cfg.ola.t;
    res["method"] = "grid";
    res["s0"] = s0;
    res["s_inf"] = sinf;
  } else {
    rs::OlaReport ola = rs::certify_immediate_stop(p, cfg.ola.t);
    res["t"] = ola.t;
    res["method"] = "analytic";
    res["s0"] = ola.s0;
    res["s_inf"] = ola.s_inf;
    res["s0_closed"] = ola.closure.closed;
    json viol = json::array();
    for (auto [i, j] : ola.closure.violations)
      viol.push_back({p.model().name(i), p.model().name(j)});
    res["closure_violations"] = viol;
    json certs = json::array();
    for (rs::StopCertificate c : ola.certificate)
      certs.push_back(rs::to_string(c));
    res["certificates"] = certs;
  }
  if (cfg.poisson) {
    std::function<double(int)> g;
    if (cfg.poisson->g_sqrt) {
      g = [](int i) { return std::sqrt(static_cast<double>(i)); };
    } else {
      std::vector<double> table = cfg.poisson->g;
      g = [table](int i) { return table[i]; };
    }
    rs::PoissonThreshold th =
        rs::poisson_threshold(cfg.poisson->lambda, cfg.cost,
                              cfg.require_utility().gamma(), g,
                              cfg.poisson->i_max);
    res["poisson"]["bound"] = rs::fmt_double(th.bound);
    if (th.i_bar)
      res["poisson"]["i_bar"] = *th.i_bar;
    else
      res["poisson"]["i_bar"] = nullptr;
  }
  rep["result"] = res;
  emit(rep, args.out_path);
  return 0;
}

int cmd_simulate(const CliArgs& args) {
  rs::ParsedConfig cfg = load(args);
  json rep = make_report("simulate", cfg);
  rs::StoppingProblem p = cfg.build_problem();
  rs::TimeGrid grid(cfg.grid.t_max, cfg.grid.dt);
  rs::SolveOptions sopt{cfg.solver.tol, cfg.solver.max_iter, false};
  rs::InfiniteSolution sol = rs::solve_infinite(p, grid, sopt);
  int i0 = cfg.initial_state(p.model());
  rs::McEstimate est = rs::mc_expected_utility(p, sol.rule, i0,
                                               mc_options(cfg));
  json res;
  res["initial_state"] = p.model().name(i0);
  res["estimate"] = {{"mean", est.mean},         {"se", est.se},
                     {"ce", rs::fmt_double(est.ce)}, {"ce_se", est.ce_se},
                     {"n", est.n},
                     {"horizon_exhausted", est.horizon_exhausted}};
  double dp = sol.value.at(i0, 0);
  res["dp_value_at_zero"] = dp;
  res["abs_diff_over_se"] =
      est.se > 0 ? std::abs(est.mean - dp) / est.se : 0.0;
  rep["result"] = res;
  emit(rep, args.out_path);
  return 0;
}

int cmd_tail_check(const CliArgs& args) {
  rs::ParsedConfig cfg = load(args);
  json rep = make_report("tail-check", cfg);
  rs::StoppingProblem p = cfg.build_problem();
  rs::TimeGrid grid(cfg.grid.t_max, cfg.grid.dt);
  rs::SolveOptions sopt{cfg.solver.tol, cfg.solver.max_iter, false};
  rs::InfiniteSolution sol = rs::solve_infinite(p, grid, sopt);
  rs::ValueFn value;
  if (p.utility().family() == rs::UtilityFamily::exponential) {
    rs::ExpSolution ex =
        rs::solve_exp_infinite(p, cfg.exp.tol, cfg.exp.max_iter);
    value = rs::make_exp_value_fn(p, ex.w);
  } else {
    value = rs::make_field_value_fn(sol.value);
  }
  int i0 = cfg.initial_state(p.model());
  rs::TailReport tail = rs::tail_diagnostic(p, sol.rule, value, i0,
                                            cfg.tail.n_list, mc_options(cfg));
  json res;
  json pts = json::array();
  for (const rs::TailPoint& pt : tail.points) {
    pts.push_back({{"n", pt.n},
                   {"estimate", pt.estimate},
                   {"se", pt.se},
                   {"surviving", pt.surviving},
                   {"truncated", pt.truncated}});
  }
  res["points"] = pts;
  res["pass"] = tail.pass;
  res["verdict"] = tail.verdict;
  rep["result"] = res;
  emit(rep, args.out_path);
  return tail.pass ? 0 : 3;
}

int cmd_compare_risk(const CliArgs& args) {
  rs::ParsedConfig cfg = load(args);
  if (!cfg.compare.utility)
    throw rs::Error("SCHEMA_ERROR", "/compare/utility: required");
  json rep = make_report("compare-risk", cfg);
  rs::StoppingProblem p_more = cfg.build_problem();
  rs::StoppingProblem p_less = p_more.with_utility(*cfg.compare.utility);
  rs::RiskComparison ra =
      rs::more_risk_averse(p_more.utility(), p_less.utility());
  json res;
  res["more_risk_averse"] = {{"holds", ra.more_averse},
                             {"detail", ra.detail}};
  if (ra.witness) res["more_risk_averse"]["witness"] = *ra.witness;
  bool ok = true;
  if (ra.more_averse) {
    rs::TimeGrid grid(cfg.grid.t_max, cfg.grid.dt);
    rs::SolveOptions sopt{cfg.solver.tol, cfg.solver.max_iter, false};
    rs::InfiniteSolution sol_more = rs::solve_infinite(p_more, grid, sopt);
    rs::InfiniteSolution sol_less = rs::solve_infinite(p_less, grid, sopt);
    rs::RegionComparison regions = rs::compare_stop_regions(
        sol_more.rule, sol_less.rule, cfg.compare.slack);
    json viol = json::array();
    for (const auto& v : regions.violations)
      viol.push_back({{"state", p_more.model().name(v.state)},
                      {"node", v.node},
                      {"wait_more", rs::fmt_double(v.wait_more)},
                      {"wait_less", rs::fmt_double(v.wait_less)}});
    res["regions"] = {{"consistent", regions.consistent},
                      {"compared", regions.compared},
                      {"guarded", regions.guarded},
                      {"violations", viol}};
    rs::McOptions mopt = mc_options(cfg);
    mopt.n_paths = cfg.compare.n_paths;
    int i0 = cfg.initial_state(p_more.model());
    rs::StochasticOrderReport order = rs::stochastic_order_check(
        p_more, sol_more.rule, sol_less.rule, i0, cfg.compare.slack, mopt);
    json deciles_more = json::array();
    for (double q : order.tau_more_deciles)
      deciles_more.push_back(rs::fmt_double(q));
    json deciles_less = json::array();
    for (double q : order.tau_less_deciles)
      deciles_less.push_back(rs::fmt_double(q));
    res["order"] = {{"n", order.n},
                    {"violations", order.violations},
                    {"inconclusive", order.inconclusive},
                    {"max_excess", order.max_excess},
                    {"pass", order.pass},
                    {"tau_more_deciles", deciles_more},
                    {"tau_less_deciles", deciles_less}};
    ok = regions.consistent && order.pass;
  }
  rep["result"] = res;
  emit(rep, args.out_path);
  return ok ? 0 : 3;
}

int cmd_house(const CliArgs& args) {
  rs::ParsedConfig cfg = load(args);
  if (cfg.house_alpha.empty())
    throw rs::Error("SCHEMA_ERROR", "/house: required for this command");
  json rep = make_report("house", cfg);
  rs::StoppingProblem p = cfg.build_problem();
  rs::TimeGrid grid(cfg.grid.t_max, cfg.grid.dt);
  rs::SolveOptions sopt{cfg.solver.tol, cfg.solver.max_iter,
                        cfg.solver.refine_argmax};
  rs::InfiniteSolution sol = rs::solve_infinite(p, grid, sopt);
  rs::HouseCheckReport checks = rs::check_house_solution(p, sol.value,
                                                         sol.rule);
  json res;
  res["solve"] = {{"iterations", sol.iterations},
                  {"residual", sol.residual}};
  res["value_at_zero"] = field_row_at_zero(sol.value);
  res["wait_at_zero"] = rule_row_at_zero(sol.rule);
  res["checks"] = {{"wait_monotone", checks.wait_monotone},
                   {"top_stops", checks.top_stops},
                   {"sandwiched", checks.sandwiched},
                   {"violations", checks.violations}};
  rep["result"] = res;
  write_csv(args.csv_path, p, sol.value, sol.rule);
  emit(rep, args.out_path);
  return checks.ok() ? 0 : 3;
}

int exit_code_for(const rs::Error& e) {
  return std::string(e.code()) == "NO_CONVERGENCE" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-sensitive optimal stopping of finite CTMCs"};
  app.set_version_flag("--version", rs::kVersion);
  app.require_subcommand(1);

  CliArgs args;
  const char* name = nullptr;
  int (*handler)(const CliArgs&) = nullptr;

  auto add = [&](const char* sub, const char* help,
                 int (*fn)(const CliArgs&), bool csv) {
    CLI::App* c = app.add_subcommand(sub, help);
    c->add_option("--config", args.config_path, "JSON problem config")
        ->required();
    c->add_option("--out", args.out_path, "JSON report path (default stdout)");
    if (csv) c->add_option("--csv", args.csv_path, "CSV table path");
    c->add_option("--seed", args.seed, "override sim.seed");
    c->add_option("--threads", args.threads, "override sim.threads");
    c->add_option("--n-paths", args.n_paths, "override sim.n_paths");
    c->callback([&name, &handler, sub, fn] {
      name = sub;
      handler = fn;
    });
    return c;
  };

  add("validate", "Check the model and report its invariants", cmd_validate,
      false);
  add("solve-finite", "Value iteration up to a jump horizon", cmd_solve_finite,
      true);
  add("solve-infinite", "Fixed point of the one-jump operator",
      cmd_solve_infinite, true);
  add("solve-exp", "Separable exponential-utility solver", cmd_solve_exp,
      true);
  add("ola", "One-look-ahead membership and certificates", cmd_ola, false);
  add("simulate", "Monte Carlo estimate under the solved rule", cmd_simulate,
      false);
  add("tail-check", "Transversality tail diagnostic", cmd_tail_check, false);
  add("compare-risk", "Comparative risk aversion consequences",
      cmd_compare_risk, false);
  add("house", "House-selling instance with structural checks", cmd_house,
      true);

  CLI11_PARSE(app, argc, argv);

  try {
    return handler(args);
  } catch (const rs::Error& e) {
    json rep;
    rep["tool"] = name;
    rep["version"] = rs::kVersion;
    rep["error"] = {{"code", e.code()}, {"message", e.what()}};
    try {
      emit(rep, args.out_path);
    } catch (const std::exception&) {
      std::cerr << rep.dump(2) << "\n";
    }
    std::cerr << "error [" << e.code() << "] " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error " << e.what() << "\n";
    return 1;
  }
}
