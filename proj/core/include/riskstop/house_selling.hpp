#pragma once

#include <string>
#include <vector>

#include "riskstop/grid.hpp"
#include "riskstop/model.hpp"
#include "riskstop/simulator.hpp"

/// House-selling instance: offers 1..m arrive by a chain whose intensity
/// into state j is alpha_j regardless of the state held, the payoff is
/// the offer itself, and waiting costs c per unit time. Equivalently,
/// i.i.d. offers land at rate sum(alpha) with distribution alpha_j /
/// sum(alpha); repeats of the current offer are invisible to the chain,
/// which is why q_ii collects only the other intensities.
namespace riskstop {

/// Chain with q_ij = alpha_j (j != i), g(i) = i, states named "1".."m".
/// Throws NONPOSITIVE_INTENSITY unless every alpha_j > 0 and m >= 2.
StoppingProblem make_house_problem(const std::vector<double>& alpha,
                                   double cost, const Utility& utility,
                                   double t_offset = 0.0);

/// Uniformized sampler: holds ~ Exp(sum(alpha)), next offer ~ alpha /
/// sum(alpha) including fictitious re-draws of the current offer. Equal
/// in law to the embedded chain of make_house_problem at the process
/// level; rule walks must use consistent rules, which are indifferent to
/// the extra self-epochs.
JumpKernel house_offer_kernel(const std::vector<double>& alpha);

/// Structural checks on a solved instance:
///  - better offers never wait longer: h*(t, i+1) <= h*(t, i) at every node;
///  - the best offer is taken at once: h*(., m) == 0;
///  - values sit between stopping with the worst and best offers:
///    U(1 - c t) <= V(t, i) <= U(m - c t) nodewise.
struct HouseCheckReport {
  bool wait_monotone = true;
  bool top_stops = true;
  bool sandwiched = true;
  std::vector<std::string> violations;  // first few, human readable
  bool ok() const { return wait_monotone && top_stops && sandwiched; }
};

HouseCheckReport check_house_solution(const StoppingProblem& p,
                                      const ValueField& value,
                                      const StoppingRule& rule,
                                      double rel_tol = 1e-9);

}  // namespace riskstop
