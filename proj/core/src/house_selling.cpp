#include "riskstop/house_selling.hpp"

#include <cmath>
#include <memory>
#include <sstream>

namespace riskstop {

namespace {

void check_alpha(const std::vector<double>& alpha) {
  if (alpha.size() < 2)
    throw Error("NONPOSITIVE_INTENSITY",
                "house model needs at least two offer levels");
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    if (!(alpha[j] > 0.0) || !std::isfinite(alpha[j])) {
      std::ostringstream os;
      os << "alpha[" << j << "] = " << alpha[j] << " must be finite and > 0";
      throw Error("NONPOSITIVE_INTENSITY", os.str());
    }
  }
}

}  // namespace

StoppingProblem make_house_problem(const std::vector<double>& alpha,
                                   double cost, const Utility& utility,
                                   double t_offset) {
  check_alpha(alpha);
  int m = static_cast<int>(alpha.size());
  std::vector<std::vector<double>> q(m, std::vector<double>(m, 0.0));
  std::vector<std::string> names(m);
  std::vector<double> g(m);
  for (int i = 0; i < m; ++i) {
    double out = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      q[i][j] = alpha[j];
      out += alpha[j];
    }
    q[i][i] = -out;
    names[i] = std::to_string(i + 1);
    g[i] = static_cast<double>(i + 1);
  }
  return StoppingProblem(CtmcModel::make(std::move(q), std::move(names)),
                         std::move(g), cost, utility, t_offset);
}

JumpKernel house_offer_kernel(const std::vector<double>& alpha) {
  check_alpha(alpha);
  struct Table {
    double total;
    std::vector<double> cdf;
  };
  auto tab = std::make_shared<Table>();
  tab->total = 0.0;
  for (double a : alpha) tab->total += a;
  tab->cdf.resize(alpha.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    acc += alpha[j] / tab->total;
    tab->cdf[j] = acc;
  }
  tab->cdf.back() = 1.0;
  return [tab](std::mt19937_64& eng, int /*state*/) -> JumpStep {
    double hold = sample_exponential(eng, tab->total);
    double u = next_uniform(eng);
    int next = static_cast<int>(tab->cdf.size()) - 1;
    for (std::size_t j = 0; j < tab->cdf.size(); ++j) {
      if (u < tab->cdf[j]) {
        next = static_cast<int>(j);
        break;
      }
    }
    return {hold, next};
  };
}

HouseCheckReport check_house_solution(const StoppingProblem& p,
                                      const ValueField& value,
                                      const StoppingRule& rule,
                                      double rel_tol) {
  int m = p.num_states();
  const TimeGrid& grid = rule.grid();
  if (value.num_states() != m || !(value.grid() == grid))
    throw Error("GRID_MISMATCH", "check_house_solution: mismatched inputs");
  HouseCheckReport rep;
  auto note = [&rep](const std::string& msg) {
    if (rep.violations.size() < 8) rep.violations.push_back(msg);
  };
  long nodes = static_cast<long>(grid.num_nodes());
  for (long k = 0; k < nodes; ++k) {
    double t = grid.t(static_cast<int>(k));
    for (int i = 0; i < m; ++i) {
      if (i + 1 < m && rule.wait(i + 1, static_cast<int>(k)) >
                           rule.wait(i, static_cast<int>(k)) + 1e-12) {
        rep.wait_monotone = false;
        std::ostringstream os;
        os << "h*(" << t << ", " << p.model().name(i + 1) << ") > h*(" << t
           << ", " << p.model().name(i) << ")";
        note(os.str());
      }
      double v = value.at(i, static_cast<int>(k));
      double lo = p.stop_utility(0, t);
      double hi = p.stop_utility(m - 1, t);
      double tol_lo = rel_tol * (1.0 + std::abs(lo));
      double tol_hi = rel_tol * (1.0 + std::abs(hi));
      if (!(is_neg_inf(lo) || v >= lo - tol_lo) ||
          !(is_neg_inf(v) || v <= hi + tol_hi)) {
        rep.sandwiched = false;
        std::ostringstream os;
        os << "V(" << t << ", " << p.model().name(i) << ") = " << v
           << " outside [" << lo << ", " << hi << "]";
        note(os.str());
      }
    }
    if (rule.wait(m - 1, static_cast<int>(k)) != 0.0) {
      rep.top_stops = false;
      std::ostringstream os;
      os << "h*(" << t << ", " << p.model().name(m - 1) << ") != 0";
      note(os.str());
    }
  }
  return rep;
}

}  // namespace riskstop
