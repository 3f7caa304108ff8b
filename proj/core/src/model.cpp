#include "riskstop/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace riskstop {

std::string to_string(UtilityFamily f) {
  switch (f) {
    case UtilityFamily::exponential: return "exponential";
    case UtilityFamily::logarithmic: return "logarithmic";
    case UtilityFamily::power: return "power";
    case UtilityFamily::linear: return "linear";
  }
  return "?";
}

Utility Utility::exponential(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw Error("BAD_UTILITY_PARAM", "exponential utility needs gamma > 0");
  return Utility(UtilityFamily::exponential, DomainKind::all_reals, gamma, 0.0,
                 kNegInf);
}

Utility Utility::logarithmic(double d) {
  if (!std::isfinite(d))
    throw Error("BAD_UTILITY_PARAM", "logarithmic utility needs finite d");
  return Utility(UtilityFamily::logarithmic, DomainKind::open_left, 0.0, 0.0, d);
}

Utility Utility::power(double p, double d) {
  if (!(p > 0.0 && p < 1.0))
    throw Error("BAD_UTILITY_PARAM", "power utility needs p in (0,1)");
  if (!std::isfinite(d))
    throw Error("BAD_UTILITY_PARAM", "power utility needs finite d");
  return Utility(UtilityFamily::power, DomainKind::closed_left, 0.0, p, d);
}

Utility Utility::linear() {
  return Utility(UtilityFamily::linear, DomainKind::all_reals, 0.0, 0.0,
                 kNegInf);
}

double Utility::operator()(double x) const {
  switch (family_) {
    case UtilityFamily::exponential:
      return -std::exp(-gamma_ * x);
    case UtilityFamily::logarithmic:
      return x > shift_ ? std::log(x - shift_) : kNegInf;
    case UtilityFamily::power:
      return x >= shift_ ? std::pow(x - shift_, p_) : kNegInf;
    case UtilityFamily::linear:
      return x;
  }
  return kNegInf;
}

double Utility::deriv(double x) const {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  switch (family_) {
    case UtilityFamily::exponential:
      return gamma_ * std::exp(-gamma_ * x);
    case UtilityFamily::logarithmic:
      return x > shift_ ? 1.0 / (x - shift_) : nan;
    case UtilityFamily::power:
      return x > shift_ ? p_ * std::pow(x - shift_, p_ - 1.0) : nan;
    case UtilityFamily::linear:
      return 1.0;
  }
  return nan;
}

double Utility::inverse(double y) const {
  switch (family_) {
    case UtilityFamily::exponential:
      // range (-inf, 0)
      return y < 0.0 ? -std::log(-y) / gamma_ : kPosInf;
    case UtilityFamily::logarithmic:
      return shift_ + std::exp(y);
    case UtilityFamily::power:
      // range [0, inf)
      return y >= 0.0 ? shift_ + std::pow(y, 1.0 / p_) : shift_;
    case UtilityFamily::linear:
      return y;
  }
  return y;
}

double Utility::arrow_pratt(double x) const {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  switch (family_) {
    case UtilityFamily::exponential:
      return gamma_;
    case UtilityFamily::logarithmic:
      return x > shift_ ? 1.0 / (x - shift_) : nan;
    case UtilityFamily::power:
      return x > shift_ ? (1.0 - p_) / (x - shift_) : nan;
    case UtilityFamily::linear:
      return 0.0;
  }
  return nan;
}

double certainty_equivalent_approx(const Utility& u, double mean,
                                   double variance) {
  if (variance < 0.0)
    throw Error("BAD_ARGUMENT", "variance must be nonnegative");
  double l = u.arrow_pratt(mean);
  if (std::isnan(l))
    throw Error("DOMAIN_MISMATCH",
                "certainty equivalent needs the mean inside dom(U)");
  return mean - 0.5 * l * variance;
}

// ---------------------------------------------------------------------------

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& is : issues) {
    os << is.code;
    if (is.row >= 0) os << " row " << is.row;
    if (is.col >= 0) os << " col " << is.col;
    os << ": " << is.message << "\n";
  }
  return os.str();
}

ValidationReport CtmcModel::check(const std::vector<std::vector<double>>& q,
                                  const std::vector<std::string>* names) {
  ValidationReport rep;
  auto add = [&rep](std::string code, int row, int col, std::string msg) {
    rep.issues.push_back({std::move(code), row, col, std::move(msg)});
  };

  const int m = static_cast<int>(q.size());
  if (m < 1) {
    add("BAD_DIMENSION", -1, -1, "generator must have at least one state");
    return rep;
  }
  for (int i = 0; i < m; ++i) {
    if (static_cast<int>(q[i].size()) != m) {
      add("BAD_DIMENSION", i, -1, "generator row has wrong length");
      return rep;
    }
  }
  if (names && !names->empty() && static_cast<int>(names->size()) != m)
    add("BAD_DIMENSION", -1, -1, "state name list does not match Q size");

  double max_abs = 0.0;
  for (const auto& row : q)
    for (double x : row) {
      if (!std::isfinite(x)) {
        add("NONFINITE_ENTRY", -1, -1, "generator entries must be finite");
        return rep;
      }
      max_abs = std::max(max_abs, std::abs(x));
    }
  const double row_tol = 1e-12 * max_abs;

  for (int i = 0; i < m; ++i) {
    double sum = 0.0;
    for (int j = 0; j < m; ++j) {
      sum += q[i][j];
      if (j != i && q[i][j] < 0.0)
        add("NEGATIVE_OFFDIAGONAL", i, j,
            "off-diagonal rate is negative: " + std::to_string(q[i][j]));
    }
    if (std::abs(sum) > row_tol)
      add("ROW_SUM_NONZERO", i, -1,
          "row sum " + std::to_string(sum) + " exceeds tolerance " +
              std::to_string(row_tol));
    if (!(-q[i][i] > row_tol))
      add("ABSORBING_STATE", i, -1,
          "exit rate must be strictly positive, q_ii = " +
              std::to_string(q[i][i]));
  }
  return rep;
}

std::optional<CtmcModel> CtmcModel::validate(std::vector<std::vector<double>> q,
                                             std::vector<std::string> names,
                                             ValidationReport* report) {
  ValidationReport rep = check(q, &names);
  if (report) *report = rep;
  if (!rep.ok()) return std::nullopt;
  const int m = static_cast<int>(q.size());
  if (names.empty()) {
    names.reserve(m);
    for (int i = 0; i < m; ++i) names.push_back("s" + std::to_string(i));
  }
  std::vector<double> exit(m);
  for (int i = 0; i < m; ++i) exit[i] = -q[i][i];
  return CtmcModel(std::move(q), std::move(names), std::move(exit));
}

CtmcModel CtmcModel::make(std::vector<std::vector<double>> q,
                          std::vector<std::string> names) {
  ValidationReport rep;
  auto model = validate(std::move(q), std::move(names), &rep);
  if (!model) throw Error("VALIDATION", "invalid generator:\n" + rep.to_string());
  return *std::move(model);
}

int CtmcModel::index_of(const std::string& name) const {
  for (int i = 0; i < num_states(); ++i)
    if (names_[i] == name) return i;
  return -1;
}

std::vector<double> CtmcModel::embedded_row(int i) const {
  std::vector<double> row(num_states(), 0.0);
  for (int j = 0; j < num_states(); ++j)
    if (j != i) row[j] = q_[i][j] / exit_[i];
  return row;
}

// ---------------------------------------------------------------------------

StoppingProblem::StoppingProblem(CtmcModel model, std::vector<double> g,
                                 double cost, Utility utility, double t_offset)
    : model_(std::move(model)),
      g_(std::move(g)),
      cost_(cost),
      u_(std::move(utility)),
      t_offset_(t_offset) {
  if (static_cast<int>(g_.size()) != model_.num_states())
    throw Error("VALIDATION", "reward vector size does not match state count");
  for (double gi : g_)
    if (!std::isfinite(gi))
      throw Error("VALIDATION", "rewards must be finite");
  if (!(cost_ > 0.0) || !std::isfinite(cost_))
    throw Error("VALIDATION", "cost rate must be strictly positive");
  if (!(t_offset_ >= 0.0) || !std::isfinite(t_offset_))
    throw Error("VALIDATION", "time offset must be nonnegative and finite");
  if (u_.domain() != DomainKind::all_reals) {
    double gmin = *std::min_element(g_.begin(), g_.end());
    if (!(u_.domain_left() < gmin))
      throw Error("VALIDATION",
                  "restricted utility domains require d < min_i g(i)");
  }
}

double StoppingProblem::domain_cap(int i) const {
  if (u_.domain() == DomainKind::all_reals) return kPosInf;
  return (g_[i] - u_.domain_left()) / cost_ - t_offset_;
}

StoppingProblem StoppingProblem::with_utility(Utility u) const {
  return StoppingProblem(model_, g_, cost_, std::move(u), t_offset_);
}

double rate_weighted_sum(const CtmcModel& model, int i,
                         const std::vector<double>& v) {
  double acc = 0.0;
  const auto& row = model.generator()[i];
  for (int j = 0; j < model.num_states(); ++j) {
    if (j == i) continue;
    double r = row[j];
    if (r > 0.0) acc += r * v[j];  // zero rates never touch -inf values
  }
  return acc;
}

}  // namespace riskstop
