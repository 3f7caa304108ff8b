#pragma once

#include <vector>

#include "riskstop/model.hpp"

/// Exponential utility collapses the time dimension: V_k(t, i) =
/// e^{c gamma t} W_k(i) with
///
///   W_0(i)     = -e^{-gamma g(i)}
///   W_{k+1}(i) = max{ -e^{-gamma g(i)},
///                     sum_{j != i} q_ij / (q_i - c gamma) W_k(j) }
///
/// for states with q_i > c gamma. States with q_i <= c gamma stop
/// immediately at every stage (waiting is never optimal there) and keep
/// W(i) = W_0(i) exactly. Stopping between jumps is never optimal, so
/// maximizers take values in {0, inf} only.
///
/// All entry points require exponential utility; Error NOT_EXPONENTIAL
/// otherwise.
namespace riskstop {

/// States with q_i <= c gamma (the cost drift dominates the jump rate).
std::vector<bool> drift_stop_states(const StoppingProblem& p);

struct ExpFiniteSolution {
  std::vector<std::vector<double>> stages;  // W_0 .. W_n
  /// waits[k][i] in {0, kNever}: maximizer of the stage-k update,
  /// k = 0 .. n-1.
  std::vector<std::vector<double>> waits;
};

ExpFiniteSolution solve_exp_finite(const StoppingProblem& p, int n);

struct ExpSolution {
  std::vector<double> w;
  std::vector<bool> stop;   // f*(i) = 0; ties resolve to stop
  std::vector<bool> drift;  // q_i <= c gamma
  int iterations = 0;
  double residual = 0.0;
};

/// Monotone iteration W_{k+1} = max(W_0, A W_k) up to the fixed point.
/// Iteration stops when the Aitken-extrapolated remaining gap drops below
/// tol, so the returned w is within tol of the limit even when the linear
/// rate is close to one. Throws NO_CONVERGENCE past max_iter.
ExpSolution solve_exp_infinite(const StoppingProblem& p, double tol = 1e-12,
                               long max_iter = 1000000);

struct ExpOracleCandidate {
  std::vector<bool> stop;
  std::vector<double> w;
};

struct ExpOracleResult {
  /// Every candidate stop set that survived all filters, in mask order.
  std::vector<ExpOracleCandidate> consistent;
  /// The candidate with the largest value (pointwise dominant when the
  /// survivor is unique, which it is in all tested models).
  const ExpOracleCandidate& primary() const;
};

/// Independent route to the fixed point: enumerate all 2^m candidate stop
/// sets T, keep those that are feasible rules (T reachable from every
/// state, drift states inside T, E[e^{c gamma tau_T}] finite, i.e.
/// spectral radius of the continuation block < 1), solve the induced
/// linear system for W, and apply the max-consistency check branch by
/// branch. Throws OVERSIZE for more than max_states states.
ExpOracleResult exp_stop_set_oracle(const StoppingProblem& p,
                                    int max_states = 15, double tol = 1e-9);

}  // namespace riskstop
