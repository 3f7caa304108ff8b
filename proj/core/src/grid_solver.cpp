#include "riskstop/grid_solver.hpp"

#include <algorithm>
#include <cmath>

namespace riskstop {

namespace {

constexpr int kNeverNode = -1;

/// Value of never stopping, read from the final grid node: the integral
/// int_0^inf e^{-q_i s} sum_j q_ij v(t_K + s, j) ds evaluated with the
/// exact time structure of the family (dom(U) = R only; -inf otherwise).
double tail_continuation(const StoppingProblem& p, int i,
                         const std::vector<double>& col_last) {
  const Utility& u = p.utility();
  if (u.domain() != DomainKind::all_reals) return kNegInf;
  const double q = p.model().exit_rate(i);
  if (u.family() == UtilityFamily::exponential) {
    const double drift = q - p.cost() * u.gamma();
    if (drift <= 0.0) return kNegInf;  // e^{c gamma s} outruns e^{-q s}
    return rate_weighted_sum(p.model(), i, col_last) / drift;
  }
  // linear: v(t_K + s, j) = v(t_K, j) - c s
  return (rate_weighted_sum(p.model(), i, col_last) - p.cost()) / q;
}

struct StateScratch {
  std::vector<double> w;      // sum_j q_ij v(j, k) per node
  std::vector<double> piece;  // trapezoid of e^{-q_i s} w over one step
  std::vector<double> stop;   // U(g(i) - c (t_offset + t_k))
};

void fill_scratch(const StoppingProblem& p, const ValueField& v, int i,
                  StateScratch& s) {
  const TimeGrid& grid = v.grid();
  const int n = grid.num_nodes();
  const int m = p.num_states();
  const auto& row = p.model().generator()[i];
  const double q = p.model().exit_rate(i);
  const double decay = std::exp(-q * grid.dt());
  const double half_dt = 0.5 * grid.dt();

  s.w.assign(n, 0.0);
  for (int j = 0; j < m; ++j) {
    if (j == i) continue;
    const double r = row[j];
    if (r <= 0.0) continue;
    for (int k = 0; k < n; ++k) s.w[k] += r * v.at(j, k);
  }
  s.piece.resize(n - 1);
  for (int k = 0; k + 1 < n; ++k)
    s.piece[k] = half_dt * (s.w[k] + decay * s.w[k + 1]);
  s.stop.resize(n);
  for (int k = 0; k < n; ++k) s.stop[k] = p.stop_utility(i, grid.t(k));
}

/// Three-point parabolic refinement of an interior argmax node l, using
/// the candidate values of "wait from t_{l-1} until node r" for
/// r = l-1, l, l+1 (their parabola has the same vertex as G_i). Returns
/// the refined absolute stop time, or t_l when the data is not concave.
double refine_vertex(const TimeGrid& grid, const StateScratch& s, double decay,
                     int l) {
  const double y0 = s.stop[l - 1];
  const double y1 = decay * s.stop[l] + s.piece[l - 1];
  const double y2 =
      decay * (decay * s.stop[l + 1] + s.piece[l]) + s.piece[l - 1];
  if (is_neg_inf(y0) || is_neg_inf(y2)) return grid.t(l);
  const double denom = y0 - 2.0 * y1 + y2;
  if (!(denom < 0.0)) return grid.t(l);
  double delta = 0.5 * (y0 - y2) / denom;
  delta = std::clamp(delta, -0.5, 0.5);
  return grid.t(l) + delta * grid.dt();
}

}  // namespace

void SweepDiagnostics::merge(const SweepDiagnostics& o) {
  truncation_warning = truncation_warning || o.truncation_warning;
  for (int i : o.boundary_argmax_states)
    if (std::find(boundary_argmax_states.begin(), boundary_argmax_states.end(),
                  i) == boundary_argmax_states.end())
      boundary_argmax_states.push_back(i);
}

ValueField initial_value(const StoppingProblem& p, const TimeGrid& grid) {
  ValueField v(grid, p.num_states());
  for (int i = 0; i < p.num_states(); ++i) {
    if (is_neg_inf(p.stop_utility(i, 0.0)))
      throw Error("EMPTY_DOMAIN",
                  "state " + p.model().name(i) +
                      " has no grid node inside dom(U); the time offset "
                      "already exceeds its cap");
    for (int k = 0; k < grid.num_nodes(); ++k)
      v.at(i, k) = p.stop_utility(i, grid.t(k));
  }
  return v;
}

SweepResult apply_T(const StoppingProblem& p, const ValueField& v,
                    bool refine_argmax) {
  const TimeGrid& grid = v.grid();
  const int m = p.num_states();
  if (v.num_states() != m)
    throw Error("GRID_MISMATCH", "value field state count mismatch");
  const int last = grid.last();

  SweepResult out{ValueField(grid, m), StoppingRule(grid, m), {}};
  std::vector<double> col_last(m);
  for (int j = 0; j < m; ++j) col_last[j] = v.at(j, last);

  StateScratch s;
  std::vector<int> arg(grid.num_nodes());
  for (int i = 0; i < m; ++i) {
    fill_scratch(p, v, i, s);
    const double q = p.model().exit_rate(i);
    const double decay = std::exp(-q * grid.dt());
    const double tail = tail_continuation(p, i, col_last);

    // Suffix maximum, ties toward the earliest stop.
    double best;
    if (s.stop[last] >= tail) {
      best = s.stop[last];
      arg[last] = last;
    } else {
      best = tail;
      arg[last] = kNeverNode;
    }
    out.value.at(i, last) = best;
    for (int k = last - 1; k >= 0; --k) {
      const double cont = decay * best + s.piece[k];
      if (s.stop[k] >= cont) {
        best = s.stop[k];
        arg[k] = k;
      } else {
        best = cont;
        arg[k] = arg[k + 1];
      }
      out.value.at(i, k) = best;
    }

    bool boundary = false;
    double refined = 0.0;
    int refined_for = -2;
    for (int k = 0; k <= last; ++k) {
      const int l = arg[k];
      if (l == kNeverNode) {
        out.rule.wait(i, k) = kNever;
        continue;
      }
      if (l == last && k < last) boundary = true;
      double u_star = grid.t(l);
      if (refine_argmax && l > k && l > 0 && l < last) {
        if (refined_for != l) {
          refined = refine_vertex(grid, s, decay, l);
          refined_for = l;
        }
        u_star = refined;
      }
      out.rule.wait(i, k) = std::max(u_star - grid.t(k), 0.0);
    }
    if (boundary) {
      out.diag.truncation_warning = true;
      out.diag.boundary_argmax_states.push_back(i);
    }
  }
  return out;
}

FiniteSolution solve_finite(const StoppingProblem& p, const TimeGrid& grid,
                            int n, bool refine_argmax) {
  if (n < 0) throw Error("BAD_ARGUMENT", "jump horizon must be nonnegative");
  FiniteSolution sol;
  sol.stages.reserve(n + 1);
  sol.stages.push_back(initial_value(p, grid));
  for (int k = 0; k < n; ++k) {
    SweepResult r = apply_T(p, sol.stages.back(), refine_argmax);
    sol.stages.push_back(std::move(r.value));
    sol.rules.push_back(std::move(r.rule));
    sol.diag.merge(r.diag);
  }
  return sol;
}

InfiniteSolution solve_infinite(const StoppingProblem& p, const TimeGrid& grid,
                                const SolveOptions& opt) {
  ValueField v = initial_value(p, grid);
  for (int it = 1; it <= opt.max_iter; ++it) {
    SweepResult r = apply_T(p, v, opt.refine_argmax);
    const double res = ValueField::finite_sup_distance(r.value, v);
    v = std::move(r.value);
    if (res <= opt.tol)
      return InfiniteSolution{std::move(v), std::move(r.rule), it, res,
                              std::move(r.diag)};
  }
  throw Error("NO_CONVERGENCE",
              "value iteration did not reach tol " + std::to_string(opt.tol) +
                  " within " + std::to_string(opt.max_iter) + " sweeps");
}

ValueField policy_value(const StoppingProblem& p, const StoppingRule& rule,
                        const TimeGrid& grid, int n) {
  if (!(rule.grid() == grid) || rule.num_states() != p.num_states())
    throw Error("RULE_GRID_MISMATCH", "rule does not live on this grid");
  const int last = grid.last();
  const bool unbounded = p.utility().domain() == DomainKind::all_reals;

  // Resolve waits to absolute stop nodes once.
  std::vector<std::vector<int>> stop_node(
      p.num_states(), std::vector<int>(grid.num_nodes(), 0));
  for (int i = 0; i < p.num_states(); ++i)
    for (int k = 0; k <= last; ++k) {
      const double h = rule.wait(i, k);
      if (h == kNever) {
        if (!unbounded)
          throw Error("RULE_GRID_MISMATCH",
                      "never-stop waits need dom(U) = R; restricted domains "
                      "admit only finite waits");
        stop_node[i][k] = kNeverNode;
        continue;
      }
      const double steps = h / grid.dt();
      const int l = k + static_cast<int>(std::llround(steps));
      if (std::abs(steps - std::llround(steps)) > 1e-6 || l < k || l > last)
        throw Error("RULE_GRID_MISMATCH",
                    "rule waits must be grid multiples that stop within the "
                    "grid (state " +
                        p.model().name(i) + ", node " + std::to_string(k) +
                        ")");
      stop_node[i][k] = l;
    }

  ValueField v = initial_value(p, grid);
  StateScratch s;
  std::vector<double> col_last(p.num_states());
  std::vector<double> next(grid.num_nodes());
  for (int stage = 0; stage < n; ++stage) {
    ValueField out(grid, p.num_states());
    for (int j = 0; j < p.num_states(); ++j) col_last[j] = v.at(j, last);
    for (int i = 0; i < p.num_states(); ++i) {
      fill_scratch(p, v, i, s);
      const double q = p.model().exit_rate(i);
      const double decay = std::exp(-q * grid.dt());
      const double tail = tail_continuation(p, i, col_last);
      const auto& l = stop_node[i];

      for (int k = last; k >= 0; --k) {
        double val;
        if (l[k] == k) {
          val = s.stop[k];
        } else if (k < last && l[k] == l[k + 1]) {
          // same absolute stop plan as the neighbor: one rescaled step
          val = decay * next[k + 1] + s.piece[k];
        } else {
          // direct accumulation, all weights <= 1
          double acc = 0.0, fac = 1.0;
          const int end = (l[k] == kNeverNode) ? last : l[k];
          for (int r = k; r < end; ++r) {
            acc += fac * s.piece[r];
            fac *= decay;
          }
          acc += fac * (l[k] == kNeverNode ? tail : s.stop[end]);
          val = acc;
        }
        next[k] = val;
        out.at(i, k) = val;
      }
    }
    v = std::move(out);
  }
  return v;
}

}  // namespace riskstop
