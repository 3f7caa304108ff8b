#include "riskstop/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <thread>

namespace riskstop {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs fn(first_path, last_path, chunk_index) over [0, n) in contiguous
/// chunks. Results must be written to per-path or per-chunk slots.
template <class Fn>
void parallel_paths(long n, int threads, Fn&& fn) {
  threads = std::min<long>(resolve_threads(threads), std::max(n, 1L));
  if (threads <= 1) {
    fn(0L, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  long chunk = (n + threads - 1) / threads;
  for (int c = 0; c < threads; ++c) {
    long lo = c * chunk;
    long hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi, c] { fn(lo, hi, c); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += kGolden);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path_index) {
  std::uint64_t s = seed + kGolden * (path_index + 1);
  (void)splitmix64(s);
  return std::mt19937_64(splitmix64(s));
}

double next_uniform(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

double sample_exponential(std::mt19937_64& eng, double rate) {
  return -std::log1p(-next_uniform(eng)) / rate;
}

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

JumpKernel model_kernel(const CtmcModel& model) {
  struct Table {
    std::vector<double> rates;
    std::vector<std::vector<double>> cdf;  // per state, cumulative embedded row
  };
  auto tab = std::make_shared<Table>();
  int m = model.num_states();
  tab->rates.resize(m);
  tab->cdf.resize(m);
  for (int i = 0; i < m; ++i) {
    tab->rates[i] = model.exit_rate(i);
    std::vector<double> row = model.embedded_row(i);
    double acc = 0.0;
    tab->cdf[i].resize(m);
    for (int j = 0; j < m; ++j) {
      acc += row[j];
      tab->cdf[i][j] = acc;
    }
    tab->cdf[i][m - 1] = 1.0;
  }
  return [tab](std::mt19937_64& eng, int state) -> JumpStep {
    double hold = sample_exponential(eng, tab->rates[state]);
    double u = next_uniform(eng);
    const std::vector<double>& cdf = tab->cdf[state];
    int next = static_cast<int>(cdf.size()) - 1;
    for (std::size_t j = 0; j < cdf.size(); ++j) {
      if (u < cdf[j]) {
        next = static_cast<int>(j);
        break;
      }
    }
    return {hold, next};
  };
}

Trajectory sample_path(const CtmcModel& model, int i0, int num_jumps,
                       std::uint64_t seed, std::uint64_t path_index) {
  if (i0 < 0 || i0 >= model.num_states())
    throw Error("BAD_ARGUMENT", "sample_path: initial state out of range");
  if (num_jumps < 0)
    throw Error("BAD_ARGUMENT", "sample_path: num_jumps must be >= 0");
  JumpKernel kernel = model_kernel(model);
  std::mt19937_64 eng = path_engine(seed, path_index);
  Trajectory out;
  out.states.reserve(num_jumps + 1);
  out.jump_times.reserve(num_jumps + 1);
  out.states.push_back(i0);
  out.jump_times.push_back(0.0);
  double t = 0.0;
  int z = i0;
  for (int k = 0; k < num_jumps; ++k) {
    JumpStep step = kernel(eng, z);
    t += step.hold;
    z = step.next;
    out.states.push_back(z);
    out.jump_times.push_back(t);
  }
  return out;
}

StopOutcome apply_rule_to_path(const StoppingRule& rule,
                               const Trajectory& path) {
  StopOutcome out;
  std::size_t n = path.states.size();
  for (std::size_t k = 0; k < n; ++k) {
    double t = path.jump_times[k];
    int z = path.states[k];
    double w = rule.wait_at(z, t);
    if (w == 0.0) return {t, z, true, static_cast<int>(k)};
    if (w != kNever && k + 1 < n && path.jump_times[k + 1] > t + w)
      return {t + w, z, true, static_cast<int>(k)};
    if (w != kNever && k + 1 == n) {
      // Planned stop after the last sampled epoch: cannot rule out a
      // preempting jump.
      out.state = z;
      out.jumps = static_cast<int>(k);
      return out;
    }
  }
  out.state = path.states.back();
  out.jumps = static_cast<int>(n) - 1;
  return out;
}

StopOutcome simulate_stop(const JumpKernel& kernel, const StoppingRule& rule,
                          int i0, int max_jumps, std::mt19937_64& eng) {
  double t = 0.0;
  int z = i0;
  for (int k = 0;; ++k) {
    double w = rule.wait_at(z, t);
    if (w == 0.0) return {t, z, true, k};
    if (k == max_jumps) return {t, z, false, k};
    JumpStep step = kernel(eng, z);
    if (w != kNever && step.hold > w) return {t + w, z, true, k};
    t += step.hold;
    z = step.next;
  }
}

McEstimate mc_expected_utility(const StoppingProblem& p,
                               const StoppingRule& rule, int i0,
                               const McOptions& opt) {
  if (opt.n_paths <= 0)
    throw Error("BAD_ARGUMENT", "mc_expected_utility: n_paths must be > 0");
  if (i0 < 0 || i0 >= p.model().num_states())
    throw Error("BAD_ARGUMENT", "mc_expected_utility: state out of range");
  JumpKernel kernel = opt.kernel ? opt.kernel : model_kernel(p.model());

  long n = opt.n_paths;
  std::vector<double> values(n, 0.0);
  std::vector<double> squares(n, 0.0);
  std::vector<long> exhausted_by_chunk(resolve_threads(opt.threads), 0);

  parallel_paths(n, opt.threads, [&](long lo, long hi, int chunk) {
    long exhausted = 0;
    for (long pth = lo; pth < hi; ++pth) {
      std::mt19937_64 eng = path_engine(opt.seed, pth);
      StopOutcome o = simulate_stop(kernel, rule, i0, opt.max_jumps, eng);
      if (!o.stopped) {
        ++exhausted;
        continue;  // slots stay zero; excluded from the mean below
      }
      double v = p.stop_utility(o.state, o.tau);
      values[pth] = v;
      squares[pth] = v * v;
    }
    exhausted_by_chunk[chunk] = exhausted;
  });

  McEstimate est;
  est.n = n;
  for (long e : exhausted_by_chunk) est.horizon_exhausted += e;
  long used = n - est.horizon_exhausted;
  if (used == 0) throw Error("NO_CONVERGENCE", "all paths exhausted max_jumps");
  est.mean = pairwise_sum(values) / static_cast<double>(used);
  if (used > 1) {
    double ss = pairwise_sum(squares);
    double var =
        (ss - static_cast<double>(used) * est.mean * est.mean) / (used - 1);
    est.se = std::sqrt(std::max(var, 0.0) / static_cast<double>(used));
  }
  est.ce = p.utility().inverse(est.mean);
  double slope = p.utility().deriv(est.ce);
  est.ce_se = (std::isfinite(slope) && slope > 0.0) ? est.se / slope : 0.0;
  return est;
}

ValueFn make_field_value_fn(const ValueField& v) {
  auto field = std::make_shared<ValueField>(v);
  return [field](double t, int state) { return field->interp(state, t); };
}

ValueFn make_exp_value_fn(const StoppingProblem& p, std::vector<double> w) {
  if (p.utility().family() != UtilityFamily::exponential)
    throw Error("NOT_EXPONENTIAL",
                "make_exp_value_fn needs exponential utility");
  if (static_cast<int>(w.size()) != p.model().num_states())
    throw Error("BAD_DIMENSION", "make_exp_value_fn: w size mismatch");
  double rate = p.cost() * p.utility().gamma();
  auto tab = std::make_shared<std::vector<double>>(std::move(w));
  return [tab, rate](double t, int state) {
    return std::exp(rate * t) * (*tab)[state];
  };
}

TailReport tail_diagnostic(const StoppingProblem& p, const StoppingRule& rule,
                           const ValueFn& value, int i0,
                           const std::vector<int>& n_list,
                           const McOptions& opt) {
  if (n_list.empty())
    throw Error("BAD_ARGUMENT", "tail_diagnostic: empty n_list");
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    if (n_list[k] < 0 || (k > 0 && n_list[k] <= n_list[k - 1]))
      throw Error("BAD_ARGUMENT",
                  "tail_diagnostic: n_list must be ascending and >= 0");
  }
  if (opt.n_paths <= 0)
    throw Error("BAD_ARGUMENT", "tail_diagnostic: n_paths must be > 0");
  JumpKernel kernel = opt.kernel ? opt.kernel : model_kernel(p.model());

  long n = opt.n_paths;
  std::size_t levels = n_list.size();
  int max_n = n_list.back();
  std::vector<std::vector<double>> contrib(levels,
                                           std::vector<double>(n, 0.0));
  int chunks = resolve_threads(opt.threads);
  std::vector<std::vector<long>> survive(chunks,
                                         std::vector<long>(levels, 0));
  std::vector<std::vector<long>> trunc(chunks, std::vector<long>(levels, 0));

  parallel_paths(n, opt.threads, [&](long lo, long hi, int chunk) {
    for (long pth = lo; pth < hi; ++pth) {
      std::mt19937_64 eng = path_engine(opt.seed, pth);
      double t = 0.0;
      int z = i0;
      bool resolved = false;  // rule already fired strictly before now
      std::size_t idx = 0;
      for (int k = 0; k <= max_n && idx < levels; ++k) {
        if (k == n_list[idx]) {
          if (!resolved) {
            ++survive[chunk][idx];
            double v = value(t, z);
            if (std::isnan(v))
              ++trunc[chunk][idx];
            else
              contrib[idx][pth] = v;
          }
          ++idx;
        }
        if (idx == levels || resolved) break;
        double w = rule.wait_at(z, t);
        if (w == 0.0) {
          resolved = true;  // tau = S_k; epochs k+1, ... contribute zero
          continue;
        }
        JumpStep step = kernel(eng, z);
        if (w != kNever && step.hold > w) resolved = true;
        t += step.hold;
        z = step.next;
      }
    }
  });

  TailReport rep;
  rep.points.resize(levels);
  for (std::size_t idx = 0; idx < levels; ++idx) {
    TailPoint& pt = rep.points[idx];
    pt.n = n_list[idx];
    for (int c = 0; c < chunks; ++c) {
      pt.surviving += survive[c][idx];
      pt.truncated += trunc[c][idx];
    }
    pt.estimate = pairwise_sum(contrib[idx]) / static_cast<double>(n);
    if (n > 1) {
      std::vector<double> sq(contrib[idx]);
      for (double& x : sq) x *= x;
      double var = (pairwise_sum(sq) -
                    static_cast<double>(n) * pt.estimate * pt.estimate) /
                   static_cast<double>(n - 1);
      pt.se = std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
    }
  }

  rep.pass = true;
  for (std::size_t k = 0; k + 1 < levels && rep.pass; ++k) {
    double a = std::abs(rep.points[k].estimate);
    double b = std::abs(rep.points[k + 1].estimate);
    if (std::isnan(a) || std::isnan(b) ||
        b > a + rep.points[k].se + rep.points[k + 1].se) {
      rep.pass = false;
      rep.verdict = "INCONCLUSIVE: tail magnitudes not decreasing at n=" +
                    std::to_string(rep.points[k + 1].n);
    }
  }
  if (rep.pass) {
    const TailPoint& last = rep.points.back();
    if (std::isnan(last.estimate) ||
        std::abs(last.estimate) > 3.0 * last.se) {
      rep.pass = false;
      rep.verdict = "INCONCLUSIVE: final tail term above three standard errors";
    }
  }
  if (rep.pass) rep.verdict = "PASS";
  return rep;
}

}  // namespace riskstop
