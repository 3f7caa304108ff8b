#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "riskstop/io.hpp"

using namespace riskstop;
using nlohmann::json;

namespace {

std::string scratch_path(const std::string& name) {
  static const std::string dir = [] {
    std::filesystem::create_directories("cli_io_scratch");
    return std::string("cli_io_scratch");
  }();
  return dir + "/" + name;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::string& args, const std::string& tag) {
  std::string out_file = scratch_path(tag + ".stdout");
  std::string err_file = scratch_path(tag + ".stderr");
  std::string cmd = std::string("\"") + RISKSTOP_CLI_PATH + "\" " + args +
                    " >" + out_file + " 2>" + err_file;
  int st = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  r.out = read_file(out_file);
  r.err = read_file(err_file);
  return r;
}

void expect_schema_error(const std::string& text, const std::string& prefix) {
  try {
    parse_config_text(text);
    FAIL_CHECK("expected SCHEMA_ERROR for: " << text);
  } catch (const Error& e) {
    CHECK(e.code() == "SCHEMA_ERROR");
    std::string msg = e.what();
    CHECK_MESSAGE(msg.rfind(prefix, 0) == 0,
                  "message '" << msg << "' lacks prefix '" << prefix << "'");
  }
}

const char* kMinimalModel = R"({
  "schema": 1,
  "utility": {"family": "log", "d": 0.0},
  "model": {"states": ["lo", "hi"], "Q": [[-1, 1], [1, -1]], "g": [1, 2]}
})";

}  // namespace

TEST_CASE("defaults fill in behind a minimal config") {
  ParsedConfig cfg = parse_config_text(kMinimalModel);
  CHECK(cfg.name == "unnamed");
  CHECK(cfg.cost == 1.0);
  CHECK(cfg.t_offset == 0.0);
  CHECK(cfg.grid.t_max == 10.0);
  CHECK(cfg.grid.dt == 0.01);
  CHECK(cfg.solver.tol == 1e-9);
  CHECK(cfg.solver.max_iter == 500);
  CHECK(cfg.sim.seed == 20260815);
  CHECK(cfg.tail.n_list == std::vector<int>{1, 2, 4, 8, 16, 32, 64});
  REQUIRE(cfg.utility.has_value());
  CHECK(cfg.utility->family() == UtilityFamily::logarithmic);
  REQUIRE(cfg.model.has_value());
  CHECK(cfg.model->name(1) == "hi");
  StoppingProblem p = cfg.build_problem();
  CHECK(p.reward(1) == 2.0);
}

TEST_CASE("resolved echo round-trips through the parser") {
  std::string text = R"({
    "schema": 1, "name": "rt", "cost": 0.5, "t_offset": 0.25,
    "utility": {"family": "power", "p": 0.5, "d": 0.1},
    "model": {"Q": [[-2, 2], [3, -3]], "g": [1, 4]},
    "grid": {"t_max": 4.0, "dt": 0.02},
    "solver": {"tol": 1e-8, "max_iter": 99, "stages": 3,
               "refine_argmax": true},
    "exp": {"tol": 1e-10, "max_iter": 5000},
    "ola": {"t": 1.5, "method": "grid", "theta_step": 0.01},
    "sim": {"n_paths": 123, "seed": 9, "threads": 2, "initial_state": 1},
    "tail": {"n_list": [2, 5]},
    "compare": {"utility": {"family": "linear"}, "slack": 0.1,
                "n_paths": 55}
  })";
  ParsedConfig cfg = parse_config_text(text);
  ParsedConfig back = parse_config_text(resolved_config_json(cfg));
  CHECK(back.name == "rt");
  CHECK(back.cost == 0.5);
  CHECK(back.t_offset == 0.25);
  CHECK(*back.utility == *cfg.utility);
  CHECK(back.model->generator() == cfg.model->generator());
  CHECK(back.g == cfg.g);
  CHECK(back.grid.dt == 0.02);
  CHECK(back.solver.stages == 3);
  CHECK(back.solver.refine_argmax);
  CHECK(back.exp.max_iter == 5000);
  CHECK(back.ola.grid_method);
  CHECK(back.ola.theta_step == 0.01);
  CHECK(back.sim.n_paths == 123);
  CHECK(back.sim.initial_state == 1);
  CHECK(back.tail.n_list == std::vector<int>{2, 5});
  CHECK(*back.compare.utility == Utility::linear());
  CHECK(back.compare.slack == 0.1);
  CHECK(back.compare.n_paths == 55);
}

TEST_CASE("schema errors point at the offending element") {
  expect_schema_error("{", "invalid JSON");
  expect_schema_error("[1]", ": expected an object");
  expect_schema_error(R"({"utility": {"family": "linear"}})", "/schema");
  expect_schema_error(R"({"schema": 2})", "/schema");
  expect_schema_error(R"({"schema": 1, "bogus": 1})", "/bogus: unknown key");
  expect_schema_error(R"({"schema": 1, "grid": {"dx": 1}})",
                      "/grid/dx: unknown key");
  expect_schema_error(R"({"schema": 1, "model": {"g": [1]}})", "/model/Q");
  expect_schema_error(
      R"({"schema": 1, "model": {"Q": [[-1, 1], "x"], "g": [1, 2]}})",
      "/model/Q/1");
  expect_schema_error(
      R"({"schema": 1, "model": {"Q": [[-1, "y"], [1, -1]], "g": [1, 2]}})",
      "/model/Q/0/1");
  expect_schema_error(
      R"({"schema": 1, "model": {"Q": [[-1, 1], [1, -1]], "g": [1]}})",
      "/model/g");
  expect_schema_error(
      R"({"schema": 1, "model": {"Q": [[-1, 2], [1, -1]], "g": [1, 2]}})",
      "/model/Q");
  expect_schema_error(R"({"schema": 1, "utility": {"family": "exp"}})",
                      "/utility/gamma");
  expect_schema_error(
      R"({"schema": 1, "utility": {"family": "exp", "gamma": -1}})",
      "/utility");
  expect_schema_error(
      R"({"schema": 1, "utility": {"family": "power", "p": 1.5}})",
      "/utility");
  expect_schema_error(R"({"schema": 1, "utility": {"family": "cubic"}})",
                      "/utility/family");
  expect_schema_error(R"({"schema": 1, "sim": {"seed": -4}})", "/sim/seed");
  expect_schema_error(
      R"({"schema": 1, "house": {"alpha": [1, 1]},
          "model": {"Q": [[-1, 1], [1, -1]], "g": [1, 2]}})",
      ": model, house and poisson are mutually exclusive");
  expect_schema_error(
      R"({"schema": 1, "poisson": {"g": "sqrt"}})", "/poisson/lambda");
  expect_schema_error(
      R"({"schema": 1, "poisson": {"lambda": 1, "g": "cbrt"}})",
      "/poisson/g");
  expect_schema_error(
      R"({"schema": 1,
          "poisson": {"lambda": 1, "i_max": 5, "g": [0, 1, 2]}})",
      "/poisson/i_max");
}

TEST_CASE("alternative chain sources build problems") {
  ParsedConfig house = parse_config_text(R"({
    "schema": 1, "cost": 0.2, "utility": {"family": "linear"},
    "house": {"alpha": [1, 2, 3]}
  })");
  StoppingProblem hp = house.build_problem();
  CHECK(hp.num_states() == 3);
  CHECK(hp.model().rate(0, 2) == 3.0);

  ParsedConfig poisson = parse_config_text(R"({
    "schema": 1, "utility": {"family": "exp", "gamma": 1.0},
    "poisson": {"lambda": 2.0, "g": [0, 1, 1.5, 1.75]}
  })");
  REQUIRE(poisson.poisson.has_value());
  CHECK(poisson.poisson->i_max == 3);
  StoppingProblem pp = poisson.build_problem();
  CHECK(pp.num_states() == 4);
  CHECK(pp.reward(3) == 1.75);
  CHECK(pp.model().rate(1, 2) == 2.0);

  ParsedConfig none = parse_config_text(
      R"({"schema": 1, "utility": {"family": "linear"}})");
  CHECK_THROWS_AS(none.build_problem(), Error);
  ParsedConfig no_utility =
      parse_config_text(R"({"schema": 1, "house": {"alpha": [1, 1]}})");
  CHECK_THROWS_AS(no_utility.build_problem(), Error);
}

TEST_CASE("initial state resolves by name or index") {
  ParsedConfig cfg = parse_config_text(kMinimalModel);
  CHECK(cfg.initial_state(*cfg.model) == 0);
  cfg.sim.initial_state = 1;
  CHECK(cfg.initial_state(*cfg.model) == 1);
  cfg.sim.initial_state = 7;
  CHECK_THROWS_AS(cfg.initial_state(*cfg.model), Error);
  cfg.sim.initial_state_name = "hi";
  CHECK(cfg.initial_state(*cfg.model) == 1);
  cfg.sim.initial_state_name = "zz";
  CHECK_THROWS_AS(cfg.initial_state(*cfg.model), Error);
  CHECK_THROWS_AS(load_config(scratch_path("missing.json")), Error);
}

TEST_CASE("double formatting is shortest round-trip with inf literals") {
  CHECK(fmt_double(0.0) == "0");
  CHECK(fmt_double(1.0) == "1");
  CHECK(fmt_double(1.5) == "1.5");
  CHECK(fmt_double(0.1) == "0.1");
  CHECK(fmt_double(-2.5) == "-2.5");
  CHECK(fmt_double(kPosInf) == "inf");
  CHECK(fmt_double(kNegInf) == "-inf");
  CHECK(fmt_double(std::nan("")) == "nan");
  // strtod, not stod: stod throws out_of_range on subnormal results.
  for (double x : {1.0 / 3.0, -2.0 / std::exp(1.0), 1e30, 5e-324}) {
    CHECK(std::strtod(fmt_double(x).c_str(), nullptr) == x);
  }
}

TEST_CASE("value table serialization is exact") {
  CtmcModel m = CtmcModel::make({{-1.0, 1.0}, {1.0, -1.0}}, {"a", "b"});
  StoppingProblem p(m, {1.0, 2.0}, 1.0, Utility::linear());
  TimeGrid grid(0.5, 0.25);
  ValueField v(grid, 2);
  StoppingRule rule(grid, 2);
  for (int k = 0; k <= grid.last(); ++k) {
    for (int i = 0; i < 2; ++i) v.at(i, k) = i + k;
    rule.wait(0, k) = 0.0;
    rule.wait(1, k) = kNever;
  }
  std::ostringstream os;
  write_value_csv(os, p, v, rule);
  CHECK(os.str() ==
        "t,state,value,h_star\n"
        "0,a,0,0\n0,b,1,inf\n"
        "0.25,a,1,0\n0.25,b,2,inf\n"
        "0.5,a,2,0\n0.5,b,3,inf\n");

  std::ostringstream es;
  write_exp_csv(es, p, {-0.5, -0.25}, {true, false});
  CHECK(es.str() == "W,state,f_star\n-0.5,a,0\n-0.25,b,inf\n");
}

// ---------------------------------------------------------------------------
// End-to-end runs of the installed command line tool.
// ---------------------------------------------------------------------------

TEST_CASE("cli reports its version and rejects bad invocations") {
  RunResult v = run_cli("--version", "version");
  CHECK(v.code == 0);
  CHECK(v.out.find(kVersion) != std::string::npos);
  CHECK(run_cli("solve-infinite", "noconfig").code != 0);
  CHECK(run_cli("frobnicate --config x.json", "badsub").code != 0);
}

TEST_CASE("cli validate reports invariants and schema failures") {
  std::string cfg = scratch_path("validate.json");
  write_file(cfg, kMinimalModel);
  std::string rep_path = scratch_path("validate.report.json");
  RunResult r = run_cli("validate --config " + cfg + " --out " + rep_path,
                        "validate");
  REQUIRE(r.code == 0);
  json rep = json::parse(read_file(rep_path));
  CHECK(rep["tool"] == "validate");
  CHECK(rep["version"] == kVersion);
  CHECK(rep["result"]["ok"] == true);
  CHECK(rep["result"]["num_states"] == 2);
  CHECK(rep["result"]["states"] == json::array({"lo", "hi"}));
  CHECK(rep["result"]["stop_domain_caps"] == json::array({"1", "2"}));
  CHECK(rep["config"]["grid"]["dt"] == 0.01);

  std::string bad = scratch_path("broken.json");
  write_file(bad, R"({"schema": 1, "bogus": true})");
  std::string bad_rep = scratch_path("broken.report.json");
  RunResult rb =
      run_cli("validate --config " + bad + " --out " + bad_rep, "broken");
  CHECK(rb.code == 1);
  json err = json::parse(read_file(bad_rep));
  CHECK(err["error"]["code"] == "SCHEMA_ERROR");
  CHECK(rb.err.find("SCHEMA_ERROR") != std::string::npos);
}

TEST_CASE("cli solves the risk neutral chain and writes tables") {
  // V(t, low) = 9 - t, V(t, high) = 10 - t on this two-state chain.
  std::string cfg = scratch_path("neutral.json");
  write_file(cfg, R"({
    "schema": 1, "cost": 1.0, "utility": {"family": "linear"},
    "model": {"Q": [[-1, 1], [1, -1]], "g": [0, 10]},
    "grid": {"t_max": 2.0, "dt": 0.005},
    "solver": {"tol": 1e-10, "max_iter": 2000, "stages": 2}
  })");
  std::string rep_path = scratch_path("neutral.report.json");
  std::string csv_path = scratch_path("neutral.csv");
  RunResult r = run_cli("solve-infinite --config " + cfg + " --out " +
                            rep_path + " --csv " + csv_path,
                        "neutral");
  REQUIRE(r.code == 0);
  json rep = json::parse(read_file(rep_path));
  double v0 = rep["result"]["value_at_zero"][0].get<double>();
  double v1 = rep["result"]["value_at_zero"][1].get<double>();
  CHECK(std::abs(v0 - 9.0) < 1e-3);
  CHECK(std::abs(v1 - 10.0) < 1e-3);
  CHECK(rep["result"]["wait_at_zero"][0] == "inf");
  CHECK(rep["result"]["wait_at_zero"][1] == 0.0);
  std::string csv = read_file(csv_path);
  CHECK(csv.rfind("t,state,value,h_star\n", 0) == 0);
  long rows = std::count(csv.begin(), csv.end(), '\n');
  CHECK(rows == 1 + 2 * 401);

  RunResult rf = run_cli("solve-finite --config " + cfg + " --out " +
                             rep_path,
                         "neutral_finite");
  REQUIRE(rf.code == 0);
  json frep = json::parse(read_file(rep_path));
  CHECK(frep["result"]["value_at_zero_by_stage"].size() == 3);  // V_0..V_2

  std::string tight = scratch_path("neutral_tight.json");
  write_file(tight, R"({
    "schema": 1, "cost": 1.0, "utility": {"family": "linear"},
    "model": {"Q": [[-1, 1], [1, -1]], "g": [0, 10]},
    "grid": {"t_max": 2.0, "dt": 0.005},
    "solver": {"max_iter": 1}
  })");
  RunResult r2 = run_cli("solve-infinite --config " + tight, "noconv");
  CHECK(r2.code == 2);
  CHECK(r2.err.find("NO_CONVERGENCE") != std::string::npos);
}

TEST_CASE("cli exponential solver emits the fixed point") {
  std::string cfg = scratch_path("exp.json");
  write_file(cfg, R"({
    "schema": 1, "cost": 1.0,
    "utility": {"family": "exponential", "gamma": 1.0},
    "model": {"Q": [[-2, 2], [2, -2]], "g": [0, 1]}
  })");
  std::string rep_path = scratch_path("exp.report.json");
  std::string csv_path = scratch_path("exp.csv");
  RunResult r = run_cli("solve-exp --config " + cfg + " --out " + rep_path +
                            " --csv " + csv_path,
                        "exp");
  REQUIRE(r.code == 0);
  json rep = json::parse(read_file(rep_path));
  CHECK(std::abs(rep["result"]["w"][0].get<double>() + 2.0 / std::exp(1.0)) <
        1e-10);
  CHECK(std::abs(rep["result"]["w"][1].get<double>() + 1.0 / std::exp(1.0)) <
        1e-10);
  CHECK(rep["result"]["stop"] == json::array({false, true}));
  CHECK(rep["result"]["stop_set"] == json::array({"s1"}));
  std::string csv = read_file(csv_path);
  CHECK(csv.rfind("W,state,f_star\n", 0) == 0);
  CHECK(csv.find(",inf\n") != std::string::npos);
  CHECK(csv.find(",0\n") != std::string::npos);
}

TEST_CASE("cli one-look-ahead carries the birth chain threshold") {
  std::string cfg = scratch_path("poisson.json");
  write_file(cfg, R"({
    "schema": 1, "cost": 1.0,
    "utility": {"family": "exponential", "gamma": 1.0},
    "poisson": {"lambda": 2.0, "i_max": 30, "g": "sqrt"}
  })");
  std::string rep_path = scratch_path("poisson.report.json");
  RunResult r = run_cli("ola --config " + cfg + " --out " + rep_path, "ola");
  REQUIRE(r.code == 0);
  json rep = json::parse(read_file(rep_path));
  CHECK(rep["result"]["method"] == "analytic");
  CHECK(rep["result"]["poisson"]["i_bar"] == 1);
  double bound = std::stod(rep["result"]["poisson"]["bound"].get<std::string>());
  CHECK(std::abs(bound - std::log(2.0)) < 1e-12);
  CHECK(rep["result"]["s0"].size() == 31);
}

TEST_CASE("cli simulate agrees with the grid value and honors overrides") {
  std::string cfg = scratch_path("house_sim.json");
  write_file(cfg, R"({
    "schema": 1, "cost": 0.5, "utility": {"family": "log", "d": 0.0},
    "house": {"alpha": [1, 1, 1]},
    "grid": {"t_max": 6.0, "dt": 0.02},
    "sim": {"n_paths": 5000, "seed": 11, "threads": 2}
  })");
  std::string rep_path = scratch_path("house_sim.report.json");
  RunResult r =
      run_cli("simulate --config " + cfg + " --out " + rep_path, "sim");
  REQUIRE(r.code == 0);
  json rep = json::parse(read_file(rep_path));
  double mean = rep["result"]["estimate"]["mean"].get<double>();
  double dp = rep["result"]["dp_value_at_zero"].get<double>();
  CHECK(std::abs(mean - dp) < 0.05);
  CHECK(rep["result"]["estimate"]["n"] == 5000);
  CHECK(rep["result"]["estimate"]["horizon_exhausted"] == 0);

  RunResult r2 = run_cli("simulate --config " + cfg + " --out " + rep_path +
                             " --seed 12 --n-paths 1000",
                         "sim2");
  REQUIRE(r2.code == 0);
  json rep2 = json::parse(read_file(rep_path));
  CHECK(rep2["result"]["estimate"]["n"] == 1000);
  CHECK(rep2["result"]["estimate"]["mean"].get<double>() != mean);
}

TEST_CASE("cli tail check fails honestly on a slow tail") {
  // Stopping pays only in the rarely reached third state; within the
  // requested number of epochs the survival mass barely decays, so the
  // transversality estimate stays far above its standard error. The
  // horizon must cover S_8, otherwise truncated lookups (contributing
  // zero) would drive the estimate down artificially.
  std::string cfg = scratch_path("slow_tail.json");
  write_file(cfg, R"({
    "schema": 1, "cost": 0.01, "utility": {"family": "linear"},
    "model": {"Q": [[-1.1, 1.0, 0.1], [1.0, -1.1, 0.1], [1.0, 0.0, -1.0]],
              "g": [0, 0.5, 100]},
    "grid": {"t_max": 20.0, "dt": 0.01},
    "sim": {"n_paths": 4000, "seed": 7},
    "tail": {"n_list": [1, 2, 4, 8]}
  })");
  std::string rep_path = scratch_path("slow_tail.report.json");
  RunResult r =
      run_cli("tail-check --config " + cfg + " --out " + rep_path, "tail");
  CHECK(r.code == 3);
  json rep = json::parse(read_file(rep_path));
  CHECK(rep["result"]["pass"] == false);
  std::string verdict = rep["result"]["verdict"].get<std::string>();
  CHECK(verdict.rfind("INCONCLUSIVE", 0) == 0);
  CHECK(rep["result"]["points"].size() == 4);
}

TEST_CASE("cli risk comparison confirms nested regions") {
  std::string cfg = scratch_path("compare.json");
  write_file(cfg, R"({
    "schema": 1, "cost": 1.0,
    "utility": {"family": "exponential", "gamma": 2.0},
    "model": {"Q": [[-2, 2], [2, -2]], "g": [0, 10]},
    "grid": {"t_max": 2.0, "dt": 0.01},
    "compare": {"utility": {"family": "exponential", "gamma": 0.5},
                "n_paths": 2000}
  })");
  std::string rep_path = scratch_path("compare.report.json");
  RunResult r = run_cli("compare-risk --config " + cfg + " --out " + rep_path,
                        "compare");
  REQUIRE(r.code == 0);
  json rep = json::parse(read_file(rep_path));
  CHECK(rep["result"]["more_risk_averse"]["holds"] == true);
  CHECK(rep["result"]["regions"]["consistent"] == true);
  CHECK(rep["result"]["order"]["pass"] == true);
  CHECK(rep["result"]["order"]["violations"] == 0);
}

TEST_CASE("cli house command runs the structural checks") {
  std::string cfg = scratch_path("house.json");
  write_file(cfg, R"({
    "schema": 1, "cost": 0.2, "utility": {"family": "log", "d": 0.0},
    "house": {"alpha": [1, 1, 1, 1, 1]},
    "grid": {"t_max": 8.0, "dt": 0.02}
  })");
  std::string rep_path = scratch_path("house.report.json");
  RunResult r = run_cli("house --config " + cfg + " --out " + rep_path,
                        "house");
  REQUIRE(r.code == 0);
  json rep = json::parse(read_file(rep_path));
  CHECK(rep["result"]["checks"]["wait_monotone"] == true);
  CHECK(rep["result"]["checks"]["top_stops"] == true);
  CHECK(rep["result"]["checks"]["sandwiched"] == true);
  CHECK(rep["result"]["wait_at_zero"][4] == 0.0);
}
