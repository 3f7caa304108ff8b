#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "riskstop/model.hpp"

/// One-look-ahead stop regions. With
///
///   D_i(theta) = U(g(i) - c theta) + (c / q_i) U'(g(i) - c theta)
///                - sum_{j != i} (q_ij / q_i) U(g(j) - c theta)
///
/// the sets are
///
///   S0_t  = { i : D_i(theta) >= 0 for all theta >= t }
///   Sinf_t = { i : D_i(theta) <  0 for all theta >= t }.
///
/// If S0_t is closed under positive transition rates, every state in it
/// stops immediately from t on; members of Sinf_t never stop while the
/// clock is past t. Both families with dom(U) = R make D_i's sign
/// constant in theta, so membership reduces to one closed-form
/// inequality (exponential: sum_{j != i} q_ij/(q_i - c gamma)
/// e^{-gamma g(j)} >= e^{-gamma g(i)}, or q_i <= c gamma; linear:
/// g(i) + c/q_i >= sum (q_ij/q_i) g(j)). Restricted utility domains are
/// outside the method's hypotheses: UNSUPPORTED_DOMAIN.
namespace riskstop {

enum class StopCertificate {
  certified_stop,
  certified_never_stop,
  /// In Sinf_t, but some exit leads to an undecided state; the no-stop
  /// conclusion is local to the state.
  never_stop_local,
  undecided,
};

std::string to_string(StopCertificate c);

enum class OlaMethod { analytic, theta_grid };

struct OlaMembership {
  bool in_s0 = false;
  bool in_s_inf = false;
  OlaMethod method = OlaMethod::analytic;
};

/// Membership of `state` in S0_t / Sinf_t via the closed-form sign.
OlaMembership ola_membership(const StoppingProblem& p, int state, double t);

struct OlaGridOptions {
  double theta_step = 1e-3;
  /// Scan horizon t + horizon_factor / min_i q_i; the tail beyond it is
  /// decided by the family's asymptotic sign.
  double horizon_factor = 50.0;
};

/// Same decision through a dense theta scan plus the asymptotic tail
/// sign; cross-check path for the analytic reduction.
OlaMembership ola_membership_grid(const StoppingProblem& p, int state,
                                  double t, const OlaGridOptions& opt = {});

struct ClosureReport {
  bool closed = true;
  /// Edges (i, j) with i in the set, q_ij > 0, j outside.
  std::vector<std::pair<int, int>> violations;
};

ClosureReport check_closure(const CtmcModel& model,
                            const std::vector<bool>& set);

struct OlaReport {
  double t = 0.0;
  std::vector<bool> s0;
  std::vector<bool> s_inf;
  ClosureReport closure;  // of s0
  std::vector<StopCertificate> certificate;
  OlaMethod method = OlaMethod::analytic;
};

/// Classify every state at clock t. S0 members are certified only when
/// the whole of S0 is closed; Sinf members are certified when all their
/// exits land in certified or Sinf states, and downgraded to
/// never_stop_local when an exit reaches an undecided state.
OlaReport certify_immediate_stop(const StoppingProblem& p, double t);

/// The t-independent exponential stop region S0 (exponential utility
/// only; throws NOT_EXPONENTIAL).
std::vector<bool> exp_ola_set(const StoppingProblem& p);

struct PoissonThreshold {
  /// Smallest certified stop level, nullopt when no level within i_max
  /// qualifies.
  std::optional<int> i_bar;
  /// Increment bound ln(lambda / (lambda - c gamma)) / gamma; +inf when
  /// lambda <= c gamma (every level stops).
  double bound = 0.0;
};

/// Poisson counting process with rate lambda, exponential utility, and
/// concave reward g: the stop region is the upward-closed set of levels i
/// with g(i+1) - g(i) <= bound. Throws G_NOT_CONCAVE if the increments of
/// g increase anywhere on 0..i_max.
PoissonThreshold poisson_threshold(double lambda, double c, double gamma,
                                   const std::function<double(int)>& g,
                                   int i_max);

/// Truncated counting-process generator on levels 0..i_max: rate lambda
/// from i to i+1, and a reflecting top level (rate lambda back to
/// i_max - 1). The boundary keeps the generator conservative; conclusions
/// about the top level are not certified.
CtmcModel make_poisson_chain(double lambda, int i_max);

}  // namespace riskstop
