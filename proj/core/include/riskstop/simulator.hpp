#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "riskstop/grid.hpp"
#include "riskstop/model.hpp"

/// Monte Carlo verification layer.
///
/// Reproducibility contract: path p of a run with seed s is generated by
/// a dedicated engine path_engine(s, p) (std::mt19937_64 seeded through
/// two splitmix64 rounds), uniforms are (x >> 11) * 2^-53, exponentials
/// use inversion -log1p(-u)/rate, and discrete draws scan the cumulative
/// row. Reductions over paths use a fixed pairwise tree. Together this
/// makes every estimate bit-identical for a given (seed, n_paths),
/// independent of thread count.
namespace riskstop {

std::uint64_t splitmix64(std::uint64_t& state);
std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path_index);
double next_uniform(std::mt19937_64& eng);                    // [0, 1)
double sample_exponential(std::mt19937_64& eng, double rate);

/// Deterministic pairwise (fixed binary tree) sum.
double pairwise_sum(std::span<const double> xs);

struct JumpStep {
  double hold;
  int next;
};

/// One sampled jump: holding time in `state`, then the next state. The
/// default kernel draws Exp(q_i) holds and the embedded row; alternative
/// kernels (e.g. uniformized samplers with fictitious self-jumps) plug in
/// here and must be equal in law at the process level.
using JumpKernel = std::function<JumpStep(std::mt19937_64&, int state)>;

JumpKernel model_kernel(const CtmcModel& model);

struct Trajectory {
  std::vector<int> states;       // Z_0, Z_1, ..., Z_n
  std::vector<double> jump_times;  // S_0 = 0, S_1, ..., S_n
};

/// Trajectory with exactly `num_jumps` jumps, reproducible per
/// (seed, path_index).
Trajectory sample_path(const CtmcModel& model, int i0, int num_jumps,
                       std::uint64_t seed, std::uint64_t path_index);

struct StopOutcome {
  double tau = 0.0;
  int state = -1;       // X_tau
  bool stopped = false;  // false: max_jumps exhausted before the rule fired
  int jumps = 0;         // jump epochs consumed
};

/// Walk a sampled trajectory under a rule. At each jump epoch the rule is
/// read through its consistency lookup; the plan is preempted when the
/// next jump arrives strictly before it. A finite positive wait at the
/// trajectory's last epoch cannot be confirmed (the next jump is not
/// sampled) and reports stopped = false.
StopOutcome apply_rule_to_path(const StoppingRule& rule,
                               const Trajectory& path);

/// Fused sampling + rule walk; consumes the same random stream as
/// sample_path, so outcomes match apply_rule_to_path on the full path.
StopOutcome simulate_stop(const JumpKernel& kernel, const StoppingRule& rule,
                          int i0, int max_jumps, std::mt19937_64& eng);

struct McOptions {
  long n_paths = 100000;
  std::uint64_t seed = 0x5eed5eed5eedULL;
  int max_jumps = 100000;
  int threads = 1;  // 0 = hardware concurrency
  /// Override the path law (defaults to model_kernel of the problem).
  JumpKernel kernel;
};

struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
  /// Certainty equivalent U^{-1}(mean) and its delta-method error.
  double ce = 0.0;
  double ce_se = 0.0;
  long n = 0;
  long horizon_exhausted = 0;  // paths excluded from the mean
};

/// Plain MC estimate of E_i0[ U(g(X_tau) - c (t_offset + tau)) ] under
/// `rule`.
McEstimate mc_expected_utility(const StoppingProblem& p,
                               const StoppingRule& rule, int i0,
                               const McOptions& opt);

/// Value function lookup used by the tail diagnostic; NaN flags a query
/// beyond the tabulated range.
using ValueFn = std::function<double(double t, int state)>;

ValueFn make_field_value_fn(const ValueField& v);
/// Exact separable values e^{c gamma t} W(i) (exponential utility).
ValueFn make_exp_value_fn(const StoppingProblem& p, std::vector<double> w);

struct TailPoint {
  int n = 0;
  double estimate = 0.0;
  double se = 0.0;
  long surviving = 0;   // paths with tau >= S_n
  long truncated = 0;   // value lookups beyond the tabulated range
};

struct TailReport {
  std::vector<TailPoint> points;
  bool pass = false;
  std::string verdict;  // PASS or INCONCLUSIVE with the reason
};

/// Estimates the transversality terms E_i0[ V(S_n, Z_n) 1{tau >= S_n} ]
/// for each n in n_list (ascending). PASS when the magnitudes decrease
/// monotonically within one standard error and the final one is below
/// three standard errors; INCONCLUSIVE otherwise. Truncated lookups
/// contribute zero and are counted.
TailReport tail_diagnostic(const StoppingProblem& p, const StoppingRule& rule,
                           const ValueFn& value, int i0,
                           const std::vector<int>& n_list,
                           const McOptions& opt);

}  // namespace riskstop
