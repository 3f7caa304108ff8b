#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

/// Model layer: finite-state conservative CTMCs, concave utilities on
/// possibly restricted domains, and the stopping problem that ties them
/// together (terminal reward g, linear waiting cost c, utility U).
///
/// Off-domain utility values are IEEE -infinity and propagate through
/// sums, positive scalings and max() without special casing. The one rule
/// callers must respect: never multiply a possibly -inf value by zero
/// (that is NaN); weighted sums over transition rows skip zero rates.
namespace riskstop {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

inline bool is_neg_inf(double x) { return x == kNegInf; }

/// Error carrying a machine-readable code string ("ROW_SUM_NONZERO", ...)
/// next to the human-readable message.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

private:
  std::string code_;
};

// ---------------------------------------------------------------------------
// Utilities
// ---------------------------------------------------------------------------

enum class UtilityFamily { exponential, logarithmic, power, linear };

/// Natural domain of U as a subset of the reals.
enum class DomainKind {
  all_reals,    // exponential, linear
  open_left,    // logarithmic: (d, inf)
  closed_left,  // power: [d, inf)
};

std::string to_string(UtilityFamily f);

/// Strictly increasing concave utility from a closed enumeration of
/// families:
///
///   exponential(gamma):  U(x) = -exp(-gamma x),   gamma > 0, on R
///   logarithmic(d):      U(x) = ln(x - d),        on (d, inf)
///   power(p, d):         U(x) = (x - d)^p,        p in (0,1), on [d, inf)
///   linear:              U(x) = x,                on R (risk neutral)
///
/// operator() is total: off-domain arguments evaluate to -inf. deriv() and
/// arrow_pratt() require the domain interior and return NaN outside it.
class Utility {
public:
  static Utility exponential(double gamma);
  static Utility logarithmic(double d);
  static Utility power(double p, double d);
  static Utility linear();

  double operator()(double x) const;

  /// U'(x) on the domain interior; NaN outside.
  double deriv(double x) const;

  /// U^{-1}(y) for y in the range of U. Values at or beyond the range
  /// limits map to the corresponding domain limit (+-inf where open).
  double inverse(double y) const;

  /// Arrow-Pratt absolute risk aversion -U''(x)/U'(x) on the domain
  /// interior; NaN outside.
  double arrow_pratt(double x) const;

  UtilityFamily family() const { return family_; }
  DomainKind domain() const { return domain_; }
  /// Left endpoint d of a restricted domain; -inf for domains equal to R.
  double domain_left() const { return shift_; }
  bool risk_neutral() const { return family_ == UtilityFamily::linear; }

  double gamma() const { return gamma_; }
  double p() const { return p_; }

  bool operator==(const Utility&) const = default;

private:
  Utility(UtilityFamily f, DomainKind dk, double gamma, double p, double shift)
      : family_(f), domain_(dk), gamma_(gamma), p_(p), shift_(shift) {}

  UtilityFamily family_;
  DomainKind domain_;
  double gamma_ = 0.0;  // exponential coefficient
  double p_ = 0.0;      // power exponent
  double shift_ = kNegInf;  // d for restricted domains
};

/// Second-order certainty equivalent approximation
///   CE(X) ~ E[X] - 0.5 * l_U(E[X]) * Var[X]
/// with l_U the Arrow-Pratt coefficient. The mean must lie in the domain
/// interior of u.
double certainty_equivalent_approx(const Utility& u, double mean,
                                   double variance);

// ---------------------------------------------------------------------------
// CTMC model
// ---------------------------------------------------------------------------

struct ValidationIssue {
  std::string code;     // ROW_SUM_NONZERO, NEGATIVE_OFFDIAGONAL, ...
  int row = -1;
  int col = -1;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
  std::string to_string() const;
};

/// Conservative CTMC on states {0, ..., m-1} with generator q:
/// off-diagonals nonnegative, rows summing to zero (within a scale-aware
/// tolerance), and exit rates q_i = -q[i][i] strictly positive (no
/// absorbing states). Instances only exist validated; use validate() or
/// make().
class CtmcModel {
public:
  /// Row-sum tolerance is 1e-12 * max |q_ij| over the whole matrix.
  static ValidationReport check(const std::vector<std::vector<double>>& q,
                                const std::vector<std::string>* names = nullptr);

  /// Returns the model, or nullopt with the defect listing in `report`.
  static std::optional<CtmcModel> validate(
      std::vector<std::vector<double>> q, std::vector<std::string> names,
      ValidationReport* report = nullptr);

  /// Throwing convenience; Error code VALIDATION with the full listing.
  static CtmcModel make(std::vector<std::vector<double>> q,
                        std::vector<std::string> names = {});

  int num_states() const { return static_cast<int>(q_.size()); }
  const std::vector<std::vector<double>>& generator() const { return q_; }
  double rate(int i, int j) const { return q_[i][j]; }
  /// Exit rate q_i = -q_ii > 0.
  double exit_rate(int i) const { return exit_[i]; }
  const std::vector<std::string>& state_names() const { return names_; }
  const std::string& name(int i) const { return names_[i]; }
  int index_of(const std::string& name) const;  // -1 if unknown

  /// Jump-chain transition row P(Z_{k+1} = j | Z_k = i) = q_ij / q_i,
  /// zero on the diagonal.
  std::vector<double> embedded_row(int i) const;

private:
  CtmcModel(std::vector<std::vector<double>> q, std::vector<std::string> names,
            std::vector<double> exit)
      : q_(std::move(q)), names_(std::move(names)), exit_(std::move(exit)) {}

  std::vector<std::vector<double>> q_;
  std::vector<std::string> names_;
  std::vector<double> exit_;
};

// ---------------------------------------------------------------------------
// Stopping problem
// ---------------------------------------------------------------------------

/// Optimal stopping of the reward U(g(X_tau) - c * (t_offset + tau)).
///
/// For restricted utility domains the standing assumption is
/// domain_left < min_i g(i); it guarantees every state has a positive
/// time window [0, cap_i] on which stopping pays a finite utility,
/// cap_i = (g(i) - d) / c - t_offset.
class StoppingProblem {
public:
  StoppingProblem(CtmcModel model, std::vector<double> g, double cost,
                  Utility utility, double t_offset = 0.0);

  const CtmcModel& model() const { return model_; }
  const std::vector<double>& reward() const { return g_; }
  double reward(int i) const { return g_[i]; }
  double cost() const { return cost_; }
  const Utility& utility() const { return u_; }
  double t_offset() const { return t_offset_; }
  int num_states() const { return model_.num_states(); }

  /// U(g(i) - cost * (t_offset + t)); -inf past the per-state cap.
  double stop_utility(int i, double t) const {
    return u_(g_[i] - cost_ * (t_offset_ + t));
  }

  /// Largest t with stop_utility finite; +inf when dom(U) = R. For open
  /// domains the cap itself already evaluates to -inf.
  double domain_cap(int i) const;

  /// Problem with the same data but a different utility.
  StoppingProblem with_utility(Utility u) const;

private:
  CtmcModel model_;
  std::vector<double> g_;
  double cost_;
  Utility u_;
  double t_offset_;
};

/// Weighted value sum over a transition row skipping zero rates, so that
/// -inf entries in v never meet a zero weight:
///   sum_{j != i, q_ij > 0} q_ij * v[j]
double rate_weighted_sum(const CtmcModel& model, int i,
                         const std::vector<double>& v);

}  // namespace riskstop
