#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "riskstop/grid.hpp"
#include "riskstop/model.hpp"

/// JSON problem configs and CSV/JSON result encoding.
///
/// A config carries exactly one chain source: an explicit "model"
/// (states/Q/g), a "house" block (offer intensities), or a "poisson"
/// block (birth chain with a reward table). Utility, cost and the
/// tool sections (grid/solver/exp/ola/sim/tail/compare) are shared.
/// Malformed input raises Error("SCHEMA_ERROR") whose message starts
/// with the JSON pointer of the offending element.
namespace riskstop {

inline constexpr const char* kVersion = "1.0.0";

struct GridSpec {
  double t_max = 10.0;
  double dt = 0.01;
};

struct SolverSpec {
  double tol = 1e-9;
  int max_iter = 500;
  int stages = 1;  // finite-horizon stage count for solve-finite
  bool refine_argmax = false;
};

struct ExpSpec {
  double tol = 1e-12;
  long max_iter = 1000000;
};

struct OlaSpec {
  double t = 0.0;
  bool grid_method = false;
  double theta_step = 1e-3;
  double horizon_factor = 50.0;
};

struct SimSpec {
  long n_paths = 100000;
  std::uint64_t seed = 20260815;
  int max_jumps = 100000;
  int threads = 1;
  int initial_state = 0;
  std::string initial_state_name;  // wins over the index when set
};

struct TailSpec {
  std::vector<int> n_list{1, 2, 4, 8, 16, 32, 64};
};

struct CompareSpec {
  std::optional<Utility> utility;  // the less risk averse side
  double slack = -1.0;             // < 0: one grid step
  long n_paths = 10000;
};

struct PoissonSpec {
  double lambda = 1.0;
  int i_max = 200;
  bool g_sqrt = false;       // g(i) = sqrt(i)
  std::vector<double> g;     // explicit table, used when nonempty
};

struct ParsedConfig {
  int schema = 1;
  std::string name = "unnamed";
  double cost = 1.0;
  double t_offset = 0.0;
  std::optional<Utility> utility;

  std::optional<CtmcModel> model;  // explicit chain
  std::vector<double> g;           // rewards for the explicit chain
  std::vector<double> house_alpha;
  std::optional<PoissonSpec> poisson;

  GridSpec grid;
  SolverSpec solver;
  ExpSpec exp;
  OlaSpec ola;
  SimSpec sim;
  TailSpec tail;
  CompareSpec compare;

  const Utility& require_utility() const;  // SCHEMA_ERROR when absent
  /// Instantiates the configured chain (exactly one source must be set).
  StoppingProblem build_problem() const;
  /// Initial state resolved against a built model.
  int initial_state(const CtmcModel& m) const;
};

ParsedConfig load_config(const std::string& path);
ParsedConfig parse_config_text(const std::string& text);

/// Full config echo with every default filled in, as pretty JSON.
std::string resolved_config_json(const ParsedConfig& cfg);

/// "inf" / "-inf" / "nan" literals, otherwise shortest round-trip decimal.
std::string fmt_double(double x);

/// Rows `t,state,value,h_star`, node-major over time then states.
void write_value_csv(std::ostream& os, const StoppingProblem& p,
                     const ValueField& value, const StoppingRule& rule);

/// Rows `W,state,f_star`; f_star is 0 where stopping is optimal, inf
/// where continuing is.
void write_exp_csv(std::ostream& os, const StoppingProblem& p,
                   const std::vector<double>& w,
                   const std::vector<bool>& stop);

}  // namespace riskstop
