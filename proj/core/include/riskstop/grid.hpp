#pragma once

#include <cmath>
#include <vector>

#include "riskstop/model.hpp"

namespace riskstop {

/// Sentinel wait for "never stop in this state".
inline constexpr double kNever = kPosInf;

/// Uniform grid 0 = t_0 < t_1 < ... < t_K = t_max with t_k = k * dt.
/// dt must divide t_max (relative tolerance 1e-12).
class TimeGrid {
public:
  TimeGrid(double t_max, double dt);

  double dt() const { return dt_; }
  double t_max() const { return t_max_; }
  int num_nodes() const { return k_ + 1; }  // K + 1
  int last() const { return k_; }           // K
  double t(int k) const { return k * dt_; }

  /// Largest node index k with t_k <= t, clamped into [0, K].
  int floor_node(double t) const;

  bool operator==(const TimeGrid& o) const {
    return k_ == o.k_ && dt_ == o.dt_;
  }

private:
  double t_max_;
  double dt_;
  int k_;
};

/// Per-state function of grid time, stored node-major per state.
/// Values are extended reals; -inf marks nodes past the domain cap.
class ValueField {
public:
  ValueField(TimeGrid grid, int num_states, double init = 0.0)
      : grid_(grid),
        m_(num_states),
        v_(static_cast<std::size_t>(num_states) * grid.num_nodes(), init) {}

  const TimeGrid& grid() const { return grid_; }
  int num_states() const { return m_; }

  double at(int i, int k) const { return v_[idx(i, k)]; }
  double& at(int i, int k) { return v_[idx(i, k)]; }

  /// Piecewise-linear interpolation in t; NaN beyond t_max (callers that
  /// sample paths use the NaN to flag truncation). Between a finite node
  /// and a -inf node the interpolant is -inf.
  double interp(int i, double t) const;

  /// Max |a - b| over nodes where both fields are finite; +inf if the
  /// -inf patterns disagree.
  static double finite_sup_distance(const ValueField& a, const ValueField& b);

private:
  std::size_t idx(int i, int k) const {
    return static_cast<std::size_t>(i) * grid_.num_nodes() + k;
  }
  TimeGrid grid_;
  int m_;
  std::vector<double> v_;
};

/// Markovian stopping rule tabulated on the grid: h(t_k, i) is the planned
/// wait upon being in state i at time t_k, a multiple of dt or kNever.
/// Solver rules satisfy the consistency property: within a segment the
/// planned absolute stop time u*(i) = t_k + h(t_k, i) is constant, which
/// is what off-grid lookups use (no interpolation).
class StoppingRule {
public:
  StoppingRule(TimeGrid grid, int num_states)
      : grid_(grid),
        m_(num_states),
        h_(static_cast<std::size_t>(num_states) * grid.num_nodes(), 0.0) {}

  const TimeGrid& grid() const { return grid_; }
  int num_states() const { return m_; }

  double wait(int i, int k) const { return h_[idx(i, k)]; }
  double& wait(int i, int k) { return h_[idx(i, k)]; }
  bool never(int i, int k) const { return h_[idx(i, k)] == kNever; }

  /// Off-grid lookup via the consistency property. For t in [t_k, t_{k+1}):
  /// wait 0 if h(t_k,i) = 0, kNever if h(t_k,i) = kNever, else the
  /// remaining time max(t_k + h(t_k,i) - t, 0). Beyond t_max the final
  /// node's entry applies.
  double wait_at(int i, double t) const;

  /// Constant-in-time rule from a stop set: h = 0 on the set, kNever off it.
  static StoppingRule from_stop_set(TimeGrid grid,
                                    const std::vector<bool>& stop);

private:
  std::size_t idx(int i, int k) const {
    return static_cast<std::size_t>(i) * grid_.num_nodes() + k;
  }
  TimeGrid grid_;
  int m_;
  std::vector<double> h_;
};

}  // namespace riskstop
