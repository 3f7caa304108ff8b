// Acceptance gate: one self-contained check per release criterion, each
// printing a single [PASS]/[FAIL] line. Exit status 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "riskstop/exp_solver.hpp"
#include "riskstop/grid_solver.hpp"
#include "riskstop/house_selling.hpp"
#include "riskstop/ola.hpp"
#include "riskstop/risk_compare.hpp"
#include "riskstop/simulator.hpp"

using namespace riskstop;

namespace {

int g_failures = 0;

void report(int n, const std::string& what, bool ok,
            const std::string& detail) {
  if (!ok) ++g_failures;
  std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", n,
              what.c_str(), detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
}

template <class Fn>
void run(int n, const std::string& what, Fn&& fn) {
  try {
    auto [ok, detail] = fn();
    report(n, what, ok, detail);
  } catch (const std::exception& e) {
    report(n, what, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Random conservative chain; off-diagonal sparsity via keep_prob.
CtmcModel random_chain(std::mt19937_64& rng, int m, double exit_lo,
                       double exit_hi, double keep_prob = 1.0) {
  std::vector<std::vector<double>> q(m, std::vector<double>(m, 0.0));
  for (int i = 0; i < m; ++i) {
    std::vector<double> w(m, 0.0);
    double total = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      if (u01(rng) < keep_prob) {
        w[j] = 0.05 + 0.95 * u01(rng);
        total += w[j];
      }
    }
    if (total == 0.0) {
      int j = (i + 1 + static_cast<int>(u01(rng) * (m - 1))) % m;
      if (j == i) j = (i + 1) % m;
      w[j] = 1.0;
      total = 1.0;
    }
    double exit = exit_lo + (exit_hi - exit_lo) * u01(rng);
    for (int j = 0; j < m; ++j)
      if (j != i) q[i][j] = exit * w[j] / total;
    q[i][i] = -exit;
  }
  return CtmcModel::make(std::move(q));
}

std::vector<double> random_rewards(std::mt19937_64& rng, int m, double lo,
                                   double hi) {
  std::vector<double> g(m);
  for (double& x : g) x = lo + (hi - lo) * u01(rng);
  return g;
}

// The worked two-state logarithmic example: the second payoff is tuned so
// the indifference level in the first state is exactly 0.1, putting the
// planned stop at 9.9.
struct LogExample {
  StoppingProblem p;
  TimeGrid grid;
  InfiniteSolution sol;
  double solve_seconds;
};

const LogExample& log_example() {
  static const LogExample ex = [] {
    double g1 = (std::exp(10.0) + 99.0) / 10.0;
    CtmcModel m = CtmcModel::make({{-1.0, 1.0}, {1.0, -1.0}});
    StoppingProblem p(m, {10.0, g1}, 1.0, Utility::logarithmic(0.0));
    TimeGrid grid(10.5, 5e-3);
    auto t0 = std::chrono::steady_clock::now();
    InfiniteSolution sol = solve_infinite(p, grid);
    std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    return LogExample{std::move(p), grid, std::move(sol), dt.count()};
  }();
  return ex;
}

/// Root of y * ln(1 + delta / y) = 1 (strictly increasing in y).
double indifference_level(double delta) {
  double lo = 1e-8, hi = 9.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (mid * std::log1p(delta / mid) < 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::pair<bool, std::string> criterion1() {
  const LogExample& ex = log_example();
  double delta = ex.p.reward(1) - ex.p.reward(0);
  double y = indifference_level(delta);
  double oracle_wait = ex.p.reward(0) / ex.p.cost() - y;  // 9.9 by design
  double h0 = ex.sol.rule.wait(0, 0);
  bool state1_stops = true;
  for (int k = 0; k <= ex.grid.last(); ++k)
    state1_stops = state1_stops && ex.sol.rule.wait(1, k) == 0.0;
  bool ok = std::abs(h0 - oracle_wait) <= 0.02 && state1_stops &&
            std::abs(oracle_wait - 9.9) < 1e-9 && ex.solve_seconds < 10.0;
  return {ok, "h*(0, s0) = " + fmt(h0) + " vs bisection " +
                  fmt(oracle_wait) + ", state 1 stops everywhere: " +
                  (state1_stops ? "yes" : "no") + ", solve " +
                  fmt(ex.solve_seconds) + " s"};
}

std::pair<bool, std::string> criterion2() {
  CtmcModel m = CtmcModel::make({{-0.5, 0.3, 0.2},
                                 {0.4, -0.9, 0.5},
                                 {0.45, 0.5, -0.95}});
  std::vector<double> g{1.0, 2.0, 3.0};
  StoppingProblem p(m, g, 1.0, Utility::exponential(1.0));

  ExpSolution sol = solve_exp_infinite(p);
  bool exact = true, all_stop = true;
  for (int i = 0; i < 3; ++i) {
    exact = exact && sol.w[i] == -std::exp(-g[i]);
    all_stop = all_stop && sol.stop[i] && sol.drift[i];
  }

  TimeGrid grid(2.0, 0.01);
  InfiniteSolution gsol = solve_infinite(p, grid);
  bool grid_stops = true;
  double value_gap = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k <= grid.last(); ++k) {
      grid_stops = grid_stops && gsol.rule.wait(i, k) == 0.0;
      value_gap = std::max(
          value_gap, std::abs(gsol.value.at(i, k) - p.stop_utility(i, grid.t(k))));
    }
  }
  bool ok = exact && all_stop && grid_stops && value_gap == 0.0;
  return {ok, std::string("W == W_0 bitwise: ") + (exact ? "yes" : "no") +
                  ", grid h* == 0 everywhere: " +
                  (grid_stops ? "yes" : "no") + ", value gap " +
                  fmt(value_gap)};
}

std::pair<bool, std::string> criterion3() {
  std::mt19937_64 rng(0xC3u);
  auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int set_mismatches = 0;
  for (int rep = 0; rep < 200; ++rep) {
    int m = 2 + static_cast<int>(u01(rng) * 7);
    double gamma = std::vector<double>{0.5, 1.0, 2.0}[rep % 3];
    double floor = gamma + 0.2;  // c = 1: keep q_i - c gamma >= 0.2
    CtmcModel chain = random_chain(rng, m, floor, floor + 2.5);
    StoppingProblem p(chain, random_rewards(rng, m, 0.0, 3.0), 1.0,
                      Utility::exponential(gamma));
    ExpSolution sol = solve_exp_infinite(p);
    ExpOracleResult oracle = exp_stop_set_oracle(p);
    const ExpOracleCandidate& best = oracle.primary();
    for (int i = 0; i < m; ++i)
      worst = std::max(worst, std::abs(sol.w[i] - best.w[i]));
    if (sol.stop != best.stop) ++set_mismatches;
  }
  std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  bool ok = worst <= 1e-10 && set_mismatches == 0 && dt.count() < 5.0;
  return {ok, "max |W - oracle| = " + fmt(worst) + ", stop set mismatches " +
                  std::to_string(set_mismatches) + "/200, " +
                  fmt(dt.count()) + " s"};
}

std::pair<bool, std::string> criterion4() {
  struct Case {
    std::vector<std::vector<double>> q;
    std::vector<double> g;
    double gamma;
  };
  std::vector<Case> cases{
      {{{-1.5, 1.0, 0.5}, {0.5, -1.0, 0.5}, {1.0, 2.0, -3.0}},
       {0.0, 1.0, 4.0},
       0.7},
      {{{-2.0, 2.0}, {2.0, -2.0}}, {0.0, 1.0}, 1.0},
      {{{-0.5, 0.25, 0.25}, {1.0, -2.0, 1.0}, {2.0, 1.0, -3.0}},
       {1.0, 0.0, 2.0},
       1.0},  // first state is a drift state
  };
  double worst_rel = 0.0;
  bool waits_ok = true, no_trunc = true;
  for (const Case& c : cases) {
    StoppingProblem p(CtmcModel::make(c.q), c.g, 1.0,
                      Utility::exponential(c.gamma));
    ExpSolution ex = solve_exp_infinite(p);
    TimeGrid grid(3.0, 0.01);
    InfiniteSolution sol = solve_infinite(p, grid);
    no_trunc = no_trunc && !sol.diag.truncation_warning;
    double rate = p.cost() * c.gamma;
    for (int i = 0; i < p.num_states(); ++i) {
      for (int k = 0; k <= grid.last(); ++k) {
        double w = sol.rule.wait(i, k);
        waits_ok = waits_ok && (w == 0.0 || w == kNever);
        double descaled = sol.value.at(i, k) * std::exp(-rate * grid.t(k));
        worst_rel = std::max(
            worst_rel, std::abs(descaled - ex.w[i]) /
                           (10.0 * grid.dt() * std::abs(ex.w[i])));
      }
    }
  }
  bool ok = worst_rel <= 1.0 && waits_ok && no_trunc;
  return {ok, "max |V e^{-c gamma t} - W| / (10 dt |W|) = " + fmt(worst_rel) +
                  ", waits in {0, inf}: " + (waits_ok ? "yes" : "no")};
}

std::pair<bool, std::string> criterion5() {
  // (a) Two-state exponential chain with closed-form W(0) = -2/e.
  CtmcModel m2 = CtmcModel::make({{-2.0, 2.0}, {2.0, -2.0}});
  StoppingProblem pe(m2, {0.0, 1.0}, 1.0, Utility::exponential(1.0));
  TimeGrid cg(5.0, 0.25);
  StoppingRule exp_rule =
      StoppingRule::from_stop_set(cg, std::vector<bool>{false, true});
  McOptions big;
  big.n_paths = 100000;
  big.seed = 71;
  McEstimate ee = mc_expected_utility(pe, exp_rule, 0, big);
  double exp_truth = -2.0 / std::exp(1.0);
  double z_exp = std::abs(ee.mean - exp_truth) / ee.se;

  // (b) The worked logarithmic example against its own grid value.
  const LogExample& ex = log_example();
  big.seed = 733;
  McEstimate el = mc_expected_utility(ex.p, ex.sol.rule, 0, big);
  double log_truth = ex.sol.value.at(0, 0);
  double z_log = std::abs(el.mean - log_truth) / el.se;

  // (c) Calibration of the reported standard errors on a finite-variance
  // estimand (payoff 10 - tau, tau ~ Exp(1), exact value 9): the rare
  // no-jump branch of the log example and the infinite-variance tail of
  // the exponential one make nominal 3 SE coverage unattainable there.
  CtmcModel mn = CtmcModel::make({{-1.0, 1.0}, {1.0, -1.0}});
  StoppingProblem pn(mn, {0.0, 10.0}, 1.0, Utility::linear());
  StoppingRule lin_rule =
      StoppingRule::from_stop_set(cg, std::vector<bool>{false, true});
  int within = 0;
  for (int r = 0; r < 100; ++r) {
    McOptions opt;
    opt.n_paths = 10000;
    opt.seed = 9000 + r;
    McEstimate est = mc_expected_utility(pn, lin_rule, 0, opt);
    if (std::abs(est.mean - 9.0) <= 3.0 * est.se) ++within;
  }

  bool ok = z_exp <= 3.0 && z_log <= 3.0 && within >= 99;
  return {ok, "z(exp) = " + fmt(z_exp) + ", z(log) = " + fmt(z_log) +
                  ", calibration " + std::to_string(within) + "/100"};
}

std::pair<bool, std::string> criterion6() {
  std::mt19937_64 rng(0xC6u);
  int closed_cases = 0, equal_on_closed = 0;
  bool subset_always = true;
  for (int rep = 0; rep < 100; ++rep) {
    int m = 3 + static_cast<int>(u01(rng) * 3);
    double gamma = rep % 2 == 0 ? 1.0 : 0.5;
    CtmcModel chain = random_chain(rng, m, 0.3 * gamma, 3.0 * gamma, 0.55);
    StoppingProblem p(chain, random_rewards(rng, m, 0.0, 3.0), 1.0,
                      Utility::exponential(gamma));
    std::vector<bool> ola = exp_ola_set(p);
    ExpSolution sol = solve_exp_infinite(p);
    for (int i = 0; i < m; ++i)
      if (sol.stop[i] && !ola[i]) subset_always = false;
    if (check_closure(chain, ola).closed) {
      ++closed_cases;
      if (ola == sol.stop) ++equal_on_closed;
    }
  }

  // Counting-process threshold: sqrt reward, lambda = 2, c = gamma = 1.
  auto g_sqrt = [](int i) { return std::sqrt(static_cast<double>(i)); };
  PoissonThreshold th = poisson_threshold(2.0, 1.0, 1.0, g_sqrt, 30);
  bool th_ok = th.i_bar.has_value() && *th.i_bar == 1 &&
               std::abs(th.bound - std::log(2.0)) < 1e-14;

  CtmcModel chain = make_poisson_chain(2.0, 20);
  std::vector<double> g(21);
  for (int i = 0; i <= 20; ++i) g[i] = g_sqrt(i);
  StoppingProblem pp(chain, g, 1.0, Utility::exponential(1.0));
  std::vector<bool> hit(21, true);
  hit[0] = false;  // stop on reaching the certified level 1
  TimeGrid grid(5.0, 0.25);
  StoppingRule rule = StoppingRule::from_stop_set(grid, hit);
  McOptions opt;
  opt.n_paths = 20000;
  opt.seed = 4242;
  McEstimate est = mc_expected_utility(pp, rule, 0, opt);
  double truth = -2.0 / std::exp(1.0);  // 2 * W_0(1), one-jump closed form
  double z = std::abs(est.mean - truth) / est.se;

  bool ok = subset_always && closed_cases >= 10 &&
            equal_on_closed == closed_cases && th_ok && z <= 3.0;
  return {ok, "closed S0 in " + std::to_string(closed_cases) +
                  "/100 models, equality on all of them: " +
                  (equal_on_closed == closed_cases ? "yes" : "no") +
                  ", i_bar = " +
                  (th.i_bar ? std::to_string(*th.i_bar) : "none") +
                  ", z(hitting rule) = " + fmt(z)};
}

struct HouseSolves {
  StoppingProblem p_log;
  StoppingProblem p_pow;
  TimeGrid grid;
  InfiniteSolution sol_log;
  InfiniteSolution sol_pow;
};

const HouseSolves& house_solves() {
  static const HouseSolves hs = [] {
    std::vector<double> alpha(5, 1.0);
    StoppingProblem p_log =
        make_house_problem(alpha, 0.2, Utility::logarithmic(0.0));
    StoppingProblem p_pow = p_log.with_utility(Utility::power(0.5, 0.0));
    TimeGrid grid(8.0, 0.02);
    InfiniteSolution sol_log = solve_infinite(p_log, grid);
    InfiniteSolution sol_pow = solve_infinite(p_pow, grid);
    return HouseSolves{std::move(p_log), std::move(p_pow), grid,
                       std::move(sol_log), std::move(sol_pow)};
  }();
  return hs;
}

std::pair<bool, std::string> criterion7() {
  std::mt19937_64 rng(0xC7u);
  bool nested = true;
  for (int rep = 0; rep < 50 && nested; ++rep) {
    int m = 2 + static_cast<int>(u01(rng) * 5);
    CtmcModel chain = random_chain(rng, m, 0.3, 4.0);
    std::vector<double> g = random_rewards(rng, m, 0.0, 3.0);
    std::vector<std::vector<bool>> sets;
    for (double gamma : {0.5, 1.0, 2.0}) {
      StoppingProblem p(chain, g, 1.0, Utility::exponential(gamma));
      sets.push_back(solve_exp_infinite(p).stop);
    }
    for (int i = 0; i < m; ++i) {
      if (sets[0][i] && !sets[1][i]) nested = false;  // S(0.5) in S(1)
      if (sets[1][i] && !sets[2][i]) nested = false;  // S(1) in S(2)
    }
  }

  const HouseSolves& hs = house_solves();
  RegionComparison regions =
      compare_stop_regions(hs.sol_log.rule, hs.sol_pow.rule);
  McOptions opt;
  opt.n_paths = 10000;
  opt.seed = 777;
  StochasticOrderReport order = stochastic_order_check(
      hs.p_log, hs.sol_log.rule, hs.sol_pow.rule, 0, -1.0, opt);

  bool ok = nested && regions.consistent && order.pass;
  std::string detail = std::string("gamma-nesting on 50 models: ") +
                       (nested ? "yes" : "no") +
                       ", log-vs-power regions consistent: " +
                       (regions.consistent ? "yes" : "no") +
                       ", pathwise violations " +
                       std::to_string(order.violations) + "/" +
                       std::to_string(order.n);
  if (!regions.violations.empty()) {
    const auto& v = regions.violations.front();
    detail += " [first region violation: state " + std::to_string(v.state) +
              " node " + std::to_string(v.node) + " " + fmt(v.wait_more) +
              " > " + fmt(v.wait_less) + "]";
  }
  return {ok, detail};
}

std::pair<bool, std::string> criterion8() {
  const HouseSolves& hs = house_solves();
  HouseCheckReport rep =
      check_house_solution(hs.p_log, hs.sol_log.value, hs.sol_log.rule);

  McOptions opt;
  opt.n_paths = 20000;
  opt.seed = 888;
  // Survival decays by ~0.8 per epoch, so the list must run deep enough
  // for the last transversality terms to hit zero survivors.
  TailReport tail = tail_diagnostic(
      hs.p_log, hs.sol_log.rule, make_field_value_fn(hs.sol_log.value), 0,
      {1, 2, 4, 8, 16, 32, 64}, opt);

  bool ok = rep.ok() && tail.pass;
  std::string detail =
      std::string("wait monotone: ") + (rep.wait_monotone ? "yes" : "no") +
      ", top offer stops: " + (rep.top_stops ? "yes" : "no") +
      ", sandwich: " + (rep.sandwiched ? "yes" : "no") +
      ", tail: " + tail.verdict;
  if (!rep.violations.empty()) detail += " [" + rep.violations.front() + "]";
  return {ok, detail};
}

std::pair<bool, std::string> criterion9() {
  struct Case {
    Utility u;
    double mu;
  };
  std::vector<Case> cases{{Utility::logarithmic(0.0), 10.0},
                          {Utility::exponential(0.7), 2.0}};
  bool ok = true;
  std::string detail;
  for (const Case& c : cases) {
    std::vector<double> ratios;
    for (double eps : {0.1, 0.05, 0.025}) {
      double exact = c.u.inverse(
          0.5 * (c.u(c.mu - eps) + c.u(c.mu + eps)));
      double approx = certainty_equivalent_approx(c.u, c.mu, eps * eps);
      ratios.push_back(std::abs(exact - approx) / (eps * eps * eps));
    }
    ok = ok && ratios[0] < 0.05 && ratios[1] < ratios[0] &&
         ratios[2] < ratios[1];
    if (!detail.empty()) detail += "; ";
    detail += "ratios " + fmt(ratios[0]) + " > " + fmt(ratios[1]) + " > " +
              fmt(ratios[2]);
  }
  return {ok, detail};
}

}  // namespace

int main() {
  run(1, "worked two-state log example stops at 9.9", criterion1);
  run(2, "all-drift exponential chain stops immediately", criterion2);
  run(3, "exponential fixed point matches the enumeration oracle",
      criterion3);
  run(4, "grid values of exponential problems separate exactly", criterion4);
  run(5, "Monte Carlo agrees with dynamic programming", criterion5);
  run(6, "one-look-ahead region matches the stop set under closure",
      criterion6);
  run(7, "stronger risk aversion never stops later", criterion7);
  run(8, "uniform house-selling instance has the classical structure",
      criterion8);
  run(9, "certainty equivalent approximation has third-order error",
      criterion9);
  if (g_failures == 0) {
    std::printf("acceptance: all 9 criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criteria FAILED\n", g_failures);
  return 1;
}
