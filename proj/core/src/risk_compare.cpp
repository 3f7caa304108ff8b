#include "riskstop/risk_compare.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace riskstop {

namespace {

/// Every supported Arrow-Pratt coefficient is either a constant c >= 0
/// (linear: 0, exponential: gamma) or a hyperbola a/(x - d) with
/// a in (0, 1] (logarithmic: a = 1, power: a = 1 - p).
struct ApForm {
  bool constant;
  double c = 0.0;
  double a = 0.0;
  double d = 0.0;
};

ApForm ap_form(const Utility& u) {
  switch (u.family()) {
    case UtilityFamily::linear:
      return {true, 0.0, 0.0, 0.0};
    case UtilityFamily::exponential:
      return {true, u.gamma(), 0.0, 0.0};
    case UtilityFamily::logarithmic:
      return {false, 0.0, 1.0, u.domain_left()};
    case UtilityFamily::power:
      return {false, 0.0, 1.0 - u.p(), u.domain_left()};
  }
  throw Error("BAD_UTILITY_PARAM", "unknown utility family");
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

}  // namespace

RiskComparison more_risk_averse(const Utility& u, const Utility& w) {
  ApForm fu = ap_form(u);
  ApForm fw = ap_form(w);
  RiskComparison out;
  if (fu.constant && fw.constant) {
    out.more_averse = fu.c >= fw.c;
    out.detail = "constant coefficients " + fmt(fu.c) + " vs " + fmt(fw.c);
    if (!out.more_averse) out.witness = 0.0;
    return out;
  }
  if (fu.constant && !fw.constant) {
    // a_w / (x - d_w) exceeds any constant near the domain edge.
    out.more_averse = false;
    out.detail = "hyperbolic coefficient unbounded near " + fmt(fw.d);
    out.witness =
        fu.c > 0.0 ? fw.d + fw.a / (2.0 * fu.c) : fw.d + 1.0;
    return out;
  }
  if (!fu.constant && fw.constant) {
    if (fw.c == 0.0) {
      out.more_averse = true;
      out.detail = "positive coefficient dominates risk-neutral";
    } else {
      out.more_averse = false;
      out.detail = "hyperbolic coefficient vanishes at infinity";
      out.witness = fu.d + 2.0 * fu.a / fw.c;
    }
    return out;
  }
  // Hyperbola vs hyperbola: a_u (x - d_w) >= a_w (x - d_u) for all
  // x > max(d_u, d_w) iff a_u >= a_w and d_u >= d_w.
  out.more_averse = fu.a >= fw.a && fu.d >= fw.d;
  out.detail = "hyperbolic (a=" + fmt(fu.a) + ", d=" + fmt(fu.d) +
               ") vs (a=" + fmt(fw.a) + ", d=" + fmt(fw.d) + ")";
  if (!out.more_averse) {
    if (fu.d < fw.d) {
      double eps = std::min(1.0, fw.a * (fw.d - fu.d) / (2.0 * fu.a));
      out.witness = fw.d + eps;
    } else {
      double cross = (fw.a * fu.d - fu.a * fw.d) / (fw.a - fu.a);
      out.witness = std::max(std::max(fu.d, fw.d), cross) + 1.0;
    }
  }
  return out;
}

RiskComparison more_risk_averse_grid(const Utility& u, const Utility& w,
                                     double lo, double hi, double step,
                                     double tol) {
  if (!(step > 0.0) || !(hi >= lo))
    throw Error("BAD_ARGUMENT", "more_risk_averse_grid: bad interval");
  if (lo <= u.domain_left() || lo <= w.domain_left())
    throw Error("DOMAIN_MISMATCH",
                "comparison interval leaves a domain interior");
  RiskComparison out;
  out.more_averse = true;
  out.detail = "sampled on [" + fmt(lo) + ", " + fmt(hi) + "] step " +
               fmt(step);
  for (double x = lo; x <= hi + 0.5 * step; x += step) {
    double lu = u.arrow_pratt(x);
    double lw = w.arrow_pratt(x);
    if (lu < lw - tol) {
      out.more_averse = false;
      out.witness = x;
      return out;
    }
  }
  return out;
}

RegionComparison compare_stop_regions(const StoppingRule& more,
                                      const StoppingRule& less,
                                      double slack) {
  if (!(more.grid() == less.grid()) || more.num_states() != less.num_states())
    throw Error("GRID_MISMATCH", "compare_stop_regions: rules on one grid");
  const TimeGrid& grid = more.grid();
  if (slack < 0.0) slack = grid.dt();
  int nodes = static_cast<int>(grid.num_nodes());
  RegionComparison out;
  for (int i = 0; i < more.num_states(); ++i) {
    // Nodes adjacent to a stop/go flip in either rule carry threshold
    // placement noise of up to one step; skip them.
    std::vector<bool> guard(nodes, false);
    auto mark_flips = [&](const StoppingRule& r) {
      for (int k = 0; k + 1 < nodes; ++k) {
        if ((r.wait(i, k) == 0.0) != (r.wait(i, k + 1) == 0.0)) {
          guard[k] = guard[k + 1] = true;
          if (k + 2 < nodes) guard[k + 2] = true;
          if (k > 0) guard[k - 1] = true;
        }
      }
    };
    mark_flips(more);
    mark_flips(less);
    for (int k = 0; k < nodes; ++k) {
      if (guard[k]) {
        ++out.guarded;
        continue;
      }
      ++out.compared;
      double hm = more.wait(i, k);
      double hl = less.wait(i, k);
      bool bad = false;
      if (hl == 0.0 && hm != 0.0) bad = true;
      if (hm == kNever) {
        if (hl != kNever) bad = true;
      } else if (hl != kNever && hm > hl + slack) {
        bad = true;
      }
      if (bad && out.violations.size() < 16)
        out.violations.push_back({i, k, hm, hl});
    }
  }
  out.consistent = out.violations.empty();
  return out;
}

namespace {

std::vector<double> deciles(std::vector<double> xs) {
  std::vector<double> out;
  if (xs.empty()) return out;
  std::sort(xs.begin(), xs.end());
  for (int q = 0; q <= 10; ++q) {
    std::size_t pos = std::min(
        xs.size() - 1, static_cast<std::size_t>(q * (xs.size() - 1) / 10));
    out.push_back(xs[pos]);
  }
  return out;
}

}  // namespace

StochasticOrderReport stochastic_order_check(const StoppingProblem& p,
                                             const StoppingRule& more,
                                             const StoppingRule& less, int i0,
                                             double slack,
                                             const McOptions& opt) {
  if (i0 < 0 || i0 >= p.model().num_states())
    throw Error("BAD_ARGUMENT", "stochastic_order_check: state out of range");
  if (opt.n_paths <= 0)
    throw Error("BAD_ARGUMENT", "stochastic_order_check: n_paths must be > 0");
  if (slack < 0.0) slack = more.grid().dt();
  JumpKernel kernel = opt.kernel ? opt.kernel : model_kernel(p.model());

  StochasticOrderReport rep;
  rep.n = opt.n_paths;
  std::vector<double> taus_more;
  std::vector<double> taus_less;
  taus_more.reserve(opt.n_paths);
  taus_less.reserve(opt.n_paths);

  for (long pth = 0; pth < opt.n_paths; ++pth) {
    std::mt19937_64 eng = path_engine(opt.seed, pth);
    double t = 0.0;
    int z = i0;
    double tau_more = kNever;  // kNever marks "not yet resolved"
    double tau_less = kNever;
    for (int k = 0; k < opt.max_jumps; ++k) {
      double wm = tau_more == kNever ? more.wait_at(z, t) : kNever;
      double wl = tau_less == kNever ? less.wait_at(z, t) : kNever;
      if (tau_more == kNever && wm == 0.0) tau_more = t;
      if (tau_less == kNever && wl == 0.0) tau_less = t;
      if (tau_more != kNever && tau_less != kNever) break;
      JumpStep step = kernel(eng, z);
      if (tau_more == kNever && wm != kNever && step.hold > wm)
        tau_more = t + wm;
      if (tau_less == kNever && wl != kNever && step.hold > wl)
        tau_less = t + wl;
      if (tau_more != kNever && tau_less != kNever) break;
      t += step.hold;
      z = step.next;
    }
    taus_more.push_back(tau_more);
    taus_less.push_back(tau_less);
    if (tau_more != kNever && tau_less != kNever) {
      double excess = tau_more - tau_less;
      rep.max_excess = std::max(rep.max_excess, excess);
      if (excess > slack) ++rep.violations;
    } else if (tau_more == kNever && tau_less != kNever) {
      // The more risk averse side is still going at the horizon. Its stop
      // time exceeds the current clock t; violation only if that already
      // breaks the order.
      if (t > tau_less + slack)
        ++rep.violations;
      else
        ++rep.inconclusive;
    }
    // tau_less unresolved: the order holds trivially on this path.
  }
  rep.tau_more_deciles = deciles(taus_more);
  rep.tau_less_deciles = deciles(taus_less);
  rep.pass = rep.violations == 0;
  return rep;
}

}  // namespace riskstop
