#include "riskstop/grid.hpp"

#include <algorithm>
#include <cmath>

namespace riskstop {

TimeGrid::TimeGrid(double t_max, double dt) : t_max_(t_max), dt_(dt) {
  if (!(dt > 0.0) || !std::isfinite(dt) || !(t_max > 0.0) ||
      !std::isfinite(t_max))
    throw Error("GRID_MISMATCH", "grid needs 0 < dt and 0 < t_max, finite");
  double k = t_max / dt;
  k_ = static_cast<int>(std::llround(k));
  if (k_ < 1 || std::abs(k_ * dt - t_max) > 1e-12 * std::max(1.0, t_max))
    throw Error("GRID_MISMATCH", "dt must divide t_max");
}

int TimeGrid::floor_node(double t) const {
  // Nudge by a relative epsilon so that t equal to a node (up to fp noise
  // from accumulated sums) lands on that node, not the one before.
  int k = static_cast<int>(std::floor(t / dt_ + 1e-9));
  return std::clamp(k, 0, k_);
}

double ValueField::interp(int i, double t) const {
  if (t < 0.0) t = 0.0;
  if (t > grid_.t_max() * (1.0 + 1e-12))
    return std::numeric_limits<double>::quiet_NaN();
  int k = std::min(grid_.floor_node(t), grid_.last() - 1);
  double a = at(i, k), b = at(i, k + 1);
  double w = (t - grid_.t(k)) / grid_.dt();
  w = std::clamp(w, 0.0, 1.0);
  if (is_neg_inf(a) || is_neg_inf(b)) {
    // At the exact left node the value is still a; anywhere into the
    // interval a -inf endpoint dominates.
    if (w == 0.0) return a;
    return kNegInf;
  }
  return a + w * (b - a);
}

double ValueField::finite_sup_distance(const ValueField& a,
                                       const ValueField& b) {
  double sup = 0.0;
  for (int i = 0; i < a.num_states(); ++i)
    for (int k = 0; k < a.grid().num_nodes(); ++k) {
      double x = a.at(i, k), y = b.at(i, k);
      bool xi = is_neg_inf(x), yi = is_neg_inf(y);
      if (xi != yi) return kPosInf;
      if (!xi) sup = std::max(sup, std::abs(x - y));
    }
  return sup;
}

double StoppingRule::wait_at(int i, double t) const {
  int k = grid_.floor_node(t);
  double h = wait(i, k);
  if (h == kNever || h == 0.0) return h;
  double u_star = grid_.t(k) + h;
  return std::max(u_star - t, 0.0);
}

StoppingRule StoppingRule::from_stop_set(TimeGrid grid,
                                         const std::vector<bool>& stop) {
  StoppingRule rule(grid, static_cast<int>(stop.size()));
  for (int i = 0; i < rule.num_states(); ++i) {
    double h = stop[i] ? 0.0 : kNever;
    for (int k = 0; k < grid.num_nodes(); ++k) rule.wait(i, k) = h;
  }
  return rule;
}

}  // namespace riskstop
