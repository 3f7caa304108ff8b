#pragma once

#include <vector>

#include "riskstop/grid.hpp"
#include "riskstop/model.hpp"

/// Dynamic programming on the time grid.
///
/// One application of the stopping operator T,
///
///   (Tv)(t,i) = sup_{theta >= 0} { U(g(i) - c(t+theta)) e^{-q_i theta}
///               + int_0^theta e^{-q_i s} sum_{j != i} q_ij v(t+s, j) ds },
///
/// is computed per state in one O(K) backward pass. Writing u = t + theta,
/// the bracket equals e^{q_i t} (G_i(u) - I_i(u=t)) with
/// G_i(u) = U(g(i) - cu) e^{-q_i u} + I_i(u) and I_i the cumulative
/// trapezoid of e^{-q_i s} sum_j q_ij v(s, j), so the sup over u >= t is a
/// suffix maximum of G_i and the maximizer u*(i) does not depend on t while
/// it stays ahead of t (which is the consistency structure stored in
/// StoppingRule). The recursion below accumulates the same trapezoid
/// pieces rescaled by e^{-q_i dt} per step, which evaluates
/// e^{q_i t}(sup G - I) without ever forming a growing exponential.
///
/// Waits beyond t_max: for restricted utility domains the cap is a hard
/// wall and the suffix maximum is interior. For dom(U) = R both closed
/// families are exactly separable in t (exponential:
/// v(t+s,j) = v(t,j) e^{c gamma s}; linear: v(t+s,j) = v(t,j) - cs), so
/// the sup over u > t_max is evaluated in closed form from the final-node
/// values and reported as h = inf when it wins. An argmax landing exactly
/// on the final grid node is still flagged with a truncation warning.
namespace riskstop {

struct SweepDiagnostics {
  /// Some argmax landed on the final grid node (t_max possibly too small).
  bool truncation_warning = false;
  /// States for which that happened.
  std::vector<int> boundary_argmax_states;

  void merge(const SweepDiagnostics& o);
};

struct SweepResult {
  ValueField value;
  StoppingRule rule;
  SweepDiagnostics diag;
};

/// V_0(t, i) = U(g(i) - c(t_offset + t)).
/// Throws EMPTY_DOMAIN if some state has no finite node at all.
ValueField initial_value(const StoppingProblem& p, const TimeGrid& grid);

/// One application of T. `refine_argmax` replaces each interior grid
/// argmax by the vertex of the parabola through its three neighboring
/// candidate values (the reported wait is then off-lattice).
SweepResult apply_T(const StoppingProblem& p, const ValueField& v,
                    bool refine_argmax = false);

struct FiniteSolution {
  /// stages[k] = V_k, k = 0..n.
  std::vector<ValueField> stages;
  /// rules[k] = maximizer of T V_k, the wait to apply when k+1 jumps of
  /// lookahead remain; rules[0] belongs to the final decision stage.
  std::vector<StoppingRule> rules;
  SweepDiagnostics diag;
};

/// Value iteration V_{k+1} = T V_k up to the jump horizon n.
FiniteSolution solve_finite(const StoppingProblem& p, const TimeGrid& grid,
                            int n, bool refine_argmax = false);

struct SolveOptions {
  double tol = 1e-9;       // sup-norm over finite nodes
  int max_iter = 500;
  bool refine_argmax = false;
};

struct InfiniteSolution {
  ValueField value;
  StoppingRule rule;
  int iterations = 0;
  double residual = 0.0;
  SweepDiagnostics diag;
};

/// Fixed point of T from V_0 (the V_n increase monotonically to V).
/// Throws NO_CONVERGENCE past max_iter.
InfiniteSolution solve_infinite(const StoppingProblem& p, const TimeGrid& grid,
                                const SolveOptions& opt = {});

/// Reward iteration for an arbitrary (stationary Markov) rule:
/// V_{k+1}(t,i) = U(g(i)-c(t+h)) e^{-q_i h}
///               + int_0^h e^{-q_i s} sum_j q_ij V_k(t+s, j) ds,
/// h = h(t, i), iterated n times from V_0. Returns V_n(., ., rule).
///
/// The rule must live on `grid` with on-lattice waits; kNever waits
/// require dom(U) = R (the tail is evaluated with the same closed forms
/// as apply_T). Throws RULE_GRID_MISMATCH otherwise.
ValueField policy_value(const StoppingProblem& p, const StoppingRule& rule,
                        const TimeGrid& grid, int n);

}  // namespace riskstop
