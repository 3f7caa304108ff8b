#include "riskstop/exp_solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "riskstop/grid.hpp"

namespace riskstop {

namespace {

void require_exponential(const StoppingProblem& p) {
  if (p.utility().family() != UtilityFamily::exponential)
    throw Error("NOT_EXPONENTIAL",
                "this solver is specific to exponential utility");
}

std::vector<double> initial_w(const StoppingProblem& p) {
  std::vector<double> w0(p.num_states());
  for (int i = 0; i < p.num_states(); ++i)
    w0[i] = -std::exp(-p.utility().gamma() * p.reward(i));
  return w0;
}

/// sum_{j != i} q_ij / (q_i - c gamma) w(j); caller guarantees no drift.
double continuation(const StoppingProblem& p, int i,
                    const std::vector<double>& w) {
  const double denom =
      p.model().exit_rate(i) - p.cost() * p.utility().gamma();
  return rate_weighted_sum(p.model(), i, w) / denom;
}

}  // namespace

std::vector<bool> drift_stop_states(const StoppingProblem& p) {
  require_exponential(p);
  const double cg = p.cost() * p.utility().gamma();
  std::vector<bool> drift(p.num_states());
  for (int i = 0; i < p.num_states(); ++i)
    drift[i] = p.model().exit_rate(i) <= cg;
  return drift;
}

ExpFiniteSolution solve_exp_finite(const StoppingProblem& p, int n) {
  require_exponential(p);
  if (n < 0) throw Error("BAD_ARGUMENT", "jump horizon must be nonnegative");
  const auto drift = drift_stop_states(p);
  const auto w0 = initial_w(p);

  ExpFiniteSolution sol;
  sol.stages.push_back(w0);
  for (int k = 0; k < n; ++k) {
    const auto& prev = sol.stages.back();
    std::vector<double> next(p.num_states());
    std::vector<double> wait(p.num_states());
    for (int i = 0; i < p.num_states(); ++i) {
      if (drift[i]) {
        next[i] = w0[i];
        wait[i] = 0.0;
        continue;
      }
      const double cont = continuation(p, i, prev);
      if (w0[i] >= cont) {  // ties stop
        next[i] = w0[i];
        wait[i] = 0.0;
      } else {
        next[i] = cont;
        wait[i] = kNever;
      }
    }
    sol.stages.push_back(std::move(next));
    sol.waits.push_back(std::move(wait));
  }
  return sol;
}

ExpSolution solve_exp_infinite(const StoppingProblem& p, double tol,
                               long max_iter) {
  require_exponential(p);
  if (!(tol > 0.0)) throw Error("BAD_ARGUMENT", "tol must be positive");
  const auto drift = drift_stop_states(p);
  const auto w0 = initial_w(p);

  std::vector<double> w = w0, next(p.num_states());
  double prev_delta = kPosInf;
  for (long it = 1; it <= max_iter; ++it) {
    double delta = 0.0;
    for (int i = 0; i < p.num_states(); ++i) {
      next[i] = drift[i] ? w0[i] : std::max(w0[i], continuation(p, i, w));
      delta = std::max(delta, std::abs(next[i] - w[i]));
    }
    w = next;
    // Remaining gap estimate delta * rho / (1 - rho) from the observed
    // linear rate; handles rates close to one.
    bool done = delta == 0.0;
    if (!done && delta <= tol) {
      const double rho = std::min(delta / prev_delta, 0.999999);
      done = delta * rho / (1.0 - rho) <= tol;
    }
    if (done) {
      ExpSolution sol;
      sol.w = std::move(w);
      sol.drift = drift;
      sol.iterations = static_cast<int>(it);
      sol.residual = delta;
      sol.stop.resize(p.num_states());
      for (int i = 0; i < p.num_states(); ++i)
        sol.stop[i] =
            drift[i] || w0[i] >= continuation(p, i, sol.w) - tol;
      return sol;
    }
    prev_delta = delta;
  }
  throw Error("NO_CONVERGENCE",
              "exponential value iteration exceeded max_iter");
}

const ExpOracleCandidate& ExpOracleResult::primary() const {
  if (consistent.empty())
    throw Error("NO_CONSISTENT_SET",
                "no candidate stop set survived the consistency checks");
  const ExpOracleCandidate* best = &consistent.front();
  double best_sum = -kPosInf;
  for (const auto& c : consistent) {
    double s = 0.0;
    for (double x : c.w) s += x;
    if (s > best_sum) {
      best_sum = s;
      best = &c;
    }
  }
  return *best;
}

ExpOracleResult exp_stop_set_oracle(const StoppingProblem& p, int max_states,
                                    double tol) {
  require_exponential(p);
  const int m = p.num_states();
  if (m > max_states)
    throw Error("OVERSIZE", "stop-set enumeration capped at " +
                                std::to_string(max_states) + " states");
  const auto drift = drift_stop_states(p);
  const auto w0 = initial_w(p);
  const double cg = p.cost() * p.utility().gamma();
  const auto& gen = p.model().generator();

  ExpOracleResult result;
  for (unsigned mask = 1; mask < (1u << m); ++mask) {
    bool skip = false;
    for (int i = 0; i < m && !skip; ++i)
      if (drift[i] && !(mask & (1u << i))) skip = true;  // drift states stop
    if (skip) continue;

    // Feasible rule: the stop set must be reachable from every state
    // through positive rates (otherwise tau_T is not a.s. finite).
    std::vector<bool> reaches(m, false);
    for (int i = 0; i < m; ++i) reaches[i] = (mask >> i) & 1u;
    for (bool grew = true; grew;) {
      grew = false;
      for (int i = 0; i < m; ++i) {
        if (reaches[i]) continue;
        for (int j = 0; j < m; ++j)
          if (j != i && gen[i][j] > 0.0 && reaches[j]) {
            reaches[i] = true;
            grew = true;
            break;
          }
      }
    }
    if (std::find(reaches.begin(), reaches.end(), false) != reaches.end())
      continue;

    std::vector<int> cont_states;
    for (int i = 0; i < m; ++i)
      if (!((mask >> i) & 1u)) cont_states.push_back(i);
    const int nc = static_cast<int>(cont_states.size());

    std::vector<double> w(m);
    for (int i = 0; i < m; ++i)
      if ((mask >> i) & 1u) w[i] = w0[i];

    if (nc > 0) {
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nc, nc);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(nc);
      for (int r = 0; r < nc; ++r) {
        const int i = cont_states[r];
        const double denom = p.model().exit_rate(i) - cg;
        for (int j = 0; j < m; ++j) {
          if (j == i || gen[i][j] <= 0.0) continue;
          const double coeff = gen[i][j] / denom;
          auto it = std::find(cont_states.begin(), cont_states.end(), j);
          if (it != cont_states.end())
            a(r, static_cast<int>(it - cont_states.begin())) = coeff;
          else
            b(r) += coeff * w0[j];
        }
      }
      // E[e^{c gamma tau_T}] is finite iff the continuation block is a
      // strict contraction in spectral radius; otherwise the linear
      // system's solution is not the value of the rule.
      const double rho =
          nc == 0 ? 0.0
                  : Eigen::EigenSolver<Eigen::MatrixXd>(a, false)
                        .eigenvalues()
                        .cwiseAbs()
                        .maxCoeff();
      if (!(rho < 1.0 - 1e-12)) continue;
      Eigen::VectorXd wc =
          (Eigen::MatrixXd::Identity(nc, nc) - a).partialPivLu().solve(b);
      for (int r = 0; r < nc; ++r) w[cont_states[r]] = wc(r);
    }

    // Max-consistency of both branches.
    bool ok = true;
    for (int i = 0; i < m && ok; ++i) {
      if (drift[i]) continue;
      const double cont = continuation(p, i, w);
      if ((mask >> i) & 1u)
        ok = w0[i] >= cont - tol;
      else
        ok = cont >= w0[i] - tol;
    }
    if (!ok) continue;

    ExpOracleCandidate cand;
    cand.stop.resize(m);
    for (int i = 0; i < m; ++i) cand.stop[i] = (mask >> i) & 1u;
    cand.w = std::move(w);
    result.consistent.push_back(std::move(cand));
  }
  return result;
}

}  // namespace riskstop
