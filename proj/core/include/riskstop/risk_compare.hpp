#pragma once

#include <optional>
#include <string>
#include <vector>

#include "riskstop/grid.hpp"
#include "riskstop/model.hpp"
#include "riskstop/simulator.hpp"

/// Comparative risk aversion and its consequences for stopping behaviour.
///
/// U is more risk averse than W when the Arrow-Pratt coefficients satisfy
/// l_U(x) >= l_W(x) on the common domain interior. For the four supported
/// families this reduces to closed-form parameter conditions (derived by
/// comparing l(x) = 0, gamma, 1/(x-d), (1-p)/(x-d) as x sweeps the
/// domain); a sampled-grid checker is kept as an independent cross-check.
namespace riskstop {

struct RiskComparison {
  bool more_averse = false;
  /// A point with l_U(x) < l_W(x) when the order fails.
  std::optional<double> witness;
  std::string detail;
};

/// Closed-form comparison, exact for every family pair.
RiskComparison more_risk_averse(const Utility& u, const Utility& w);

/// Sampled comparison of Arrow-Pratt coefficients over [lo, hi] with the
/// given step; requires [lo, hi] inside both domain interiors
/// (DOMAIN_MISMATCH otherwise). Tolerance guards ties.
RiskComparison more_risk_averse_grid(const Utility& u, const Utility& w,
                                     double lo, double hi,
                                     double step = 1e-2, double tol = 1e-12);

/// Nodewise containment check of two solved rules on one grid: wherever
/// the less risk averse rule stops, the more risk averse one must stop,
/// and its waits may exceed the other's by at most `slack` (default one
/// grid step). Nodes within one node of a stop/go flip in either rule are
/// excluded; threshold placement there is discretization noise.
struct RegionComparison {
  struct Violation {
    int state;
    int node;
    double wait_more;
    double wait_less;
  };
  bool consistent = false;
  long compared = 0;  // nodes checked
  long guarded = 0;   // nodes excluded near flips
  std::vector<Violation> violations;  // first few, for reporting
};

RegionComparison compare_stop_regions(const StoppingRule& more,
                                      const StoppingRule& less,
                                      double slack = -1.0);

/// Pathwise coupling check: both rules applied to the same sampled jump
/// sequence; the more risk averse rule must stop no later than the other
/// plus `slack`. Quantiles of the realized stop times (deciles,
/// unresolved paths counted as +inf) summarize the two laws.
struct StochasticOrderReport {
  long n = 0;
  long violations = 0;
  long inconclusive = 0;  // horizon exhausted before the order was decided
  double max_excess = 0.0;  // largest tau_more - tau_less observed
  bool pass = false;
  std::vector<double> tau_more_deciles;
  std::vector<double> tau_less_deciles;
};

StochasticOrderReport stochastic_order_check(const StoppingProblem& p,
                                             const StoppingRule& more,
                                             const StoppingRule& less, int i0,
                                             double slack,
                                             const McOptions& opt);

}  // namespace riskstop
