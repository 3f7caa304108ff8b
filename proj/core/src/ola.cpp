#include "riskstop/ola.hpp"

#include <algorithm>
#include <cmath>

namespace riskstop {

namespace {

void require_unbounded(const StoppingProblem& p) {
  if (p.utility().domain() != DomainKind::all_reals)
    throw Error("UNSUPPORTED_DOMAIN",
                "one-look-ahead regions need dom(U) = R");
}

double d_value(const StoppingProblem& p, int i, double theta) {
  const Utility& u = p.utility();
  const double q = p.model().exit_rate(i);
  const double x = p.reward(i) - p.cost() * theta;
  double sum = 0.0;
  for (int j = 0; j < p.num_states(); ++j) {
    if (j == i) continue;
    const double r = p.model().rate(i, j);
    if (r > 0.0) sum += (r / q) * u(p.reward(j) - p.cost() * theta);
  }
  return u(x) + (p.cost() / q) * u.deriv(x) - sum;
}

/// Sign of D_i, constant in theta for both unbounded families.
/// Returns +1 for D >= 0 everywhere, -1 for D < 0 everywhere.
int constant_sign(const StoppingProblem& p, int i) {
  const Utility& u = p.utility();
  const double q = p.model().exit_rate(i);
  if (u.family() == UtilityFamily::exponential) {
    const double cg = p.cost() * u.gamma();
    if (q <= cg) return +1;
    double sum = 0.0;
    for (int j = 0; j < p.num_states(); ++j) {
      if (j == i) continue;
      const double r = p.model().rate(i, j);
      if (r > 0.0) sum += r / (q - cg) * std::exp(-u.gamma() * p.reward(j));
    }
    return sum >= std::exp(-u.gamma() * p.reward(i)) ? +1 : -1;
  }
  // linear: D is literally constant
  return d_value(p, i, 0.0) >= 0.0 ? +1 : -1;
}

}  // namespace

std::string to_string(StopCertificate c) {
  switch (c) {
    case StopCertificate::certified_stop: return "CERTIFIED_STOP";
    case StopCertificate::certified_never_stop: return "CERTIFIED_NEVER_STOP";
    case StopCertificate::never_stop_local: return "NEVER_STOP_LOCAL";
    case StopCertificate::undecided: return "UNDECIDED";
  }
  return "?";
}

OlaMembership ola_membership(const StoppingProblem& p, int state, double t) {
  require_unbounded(p);
  (void)t;  // sign is t-independent for the closed-form families
  OlaMembership m;
  m.method = OlaMethod::analytic;
  const int sign = constant_sign(p, state);
  m.in_s0 = sign > 0;
  m.in_s_inf = sign < 0;
  return m;
}

OlaMembership ola_membership_grid(const StoppingProblem& p, int state,
                                  double t, const OlaGridOptions& opt) {
  require_unbounded(p);
  double qmin = kPosInf;
  for (int i = 0; i < p.num_states(); ++i)
    qmin = std::min(qmin, p.model().exit_rate(i));
  const double horizon = t + opt.horizon_factor / qmin;

  bool all_nonneg = true, all_neg = true;
  for (double theta = t; theta <= horizon; theta += opt.theta_step) {
    const double d = d_value(p, state, theta);
    if (d >= 0.0) all_neg = false;
    else all_nonneg = false;
    if (!all_nonneg && !all_neg) break;
  }
  // Tail: past any finite horizon the sign settles to the asymptotic one.
  const int tail = constant_sign(p, state);
  OlaMembership m;
  m.method = OlaMethod::theta_grid;
  m.in_s0 = all_nonneg && tail > 0;
  m.in_s_inf = all_neg && tail < 0;
  return m;
}

ClosureReport check_closure(const CtmcModel& model,
                            const std::vector<bool>& set) {
  ClosureReport rep;
  for (int i = 0; i < model.num_states(); ++i) {
    if (!set[i]) continue;
    for (int j = 0; j < model.num_states(); ++j)
      if (j != i && model.rate(i, j) > 0.0 && !set[j]) {
        rep.closed = false;
        rep.violations.emplace_back(i, j);
      }
  }
  return rep;
}

OlaReport certify_immediate_stop(const StoppingProblem& p, double t) {
  require_unbounded(p);
  const int m = p.num_states();
  OlaReport rep;
  rep.t = t;
  rep.s0.resize(m);
  rep.s_inf.resize(m);
  for (int i = 0; i < m; ++i) {
    const auto mem = ola_membership(p, i, t);
    rep.s0[i] = mem.in_s0;
    rep.s_inf[i] = mem.in_s_inf;
    rep.method = mem.method;
  }
  rep.closure = check_closure(p.model(), rep.s0);

  rep.certificate.assign(m, StopCertificate::undecided);
  for (int i = 0; i < m; ++i)
    if (rep.closure.closed && rep.s0[i])
      rep.certificate[i] = StopCertificate::certified_stop;
  for (int i = 0; i < m; ++i) {
    if (!rep.s_inf[i]) continue;
    bool decided_exits = true;
    for (int j = 0; j < m && decided_exits; ++j)
      if (j != i && p.model().rate(i, j) > 0.0)
        decided_exits = rep.s_inf[j] ||
                        rep.certificate[j] == StopCertificate::certified_stop;
    rep.certificate[i] = decided_exits ? StopCertificate::certified_never_stop
                                       : StopCertificate::never_stop_local;
  }
  return rep;
}

std::vector<bool> exp_ola_set(const StoppingProblem& p) {
  if (p.utility().family() != UtilityFamily::exponential)
    throw Error("NOT_EXPONENTIAL", "the t-free stop region is specific to "
                                   "exponential utility");
  std::vector<bool> s0(p.num_states());
  for (int i = 0; i < p.num_states(); ++i)
    s0[i] = constant_sign(p, i) > 0;
  return s0;
}

PoissonThreshold poisson_threshold(double lambda, double c, double gamma,
                                   const std::function<double(int)>& g,
                                   int i_max) {
  if (!(lambda > 0.0) || !(c > 0.0) || !(gamma > 0.0) || i_max < 0)
    throw Error("BAD_ARGUMENT",
                "poisson threshold needs lambda, c, gamma > 0 and i_max >= 0");
  double scale = 0.0;
  std::vector<double> inc(i_max + 1);
  for (int i = 0; i <= i_max; ++i) {
    inc[i] = g(i + 1) - g(i);
    scale = std::max(scale, std::abs(inc[i]));
  }
  for (int i = 0; i + 1 <= i_max; ++i)
    if (inc[i + 1] > inc[i] + 1e-12 * std::max(1.0, scale))
      throw Error("G_NOT_CONCAVE",
                  "reward increments grow between levels " +
                      std::to_string(i) + " and " + std::to_string(i + 1));

  PoissonThreshold out;
  if (lambda <= c * gamma) {
    out.bound = kPosInf;
    out.i_bar = 0;  // waiting never pays; every level stops
    return out;
  }
  out.bound = std::log(lambda / (lambda - c * gamma)) / gamma;
  for (int i = 0; i <= i_max; ++i)
    if (inc[i] <= out.bound) {
      out.i_bar = i;
      break;
    }
  return out;
}

CtmcModel make_poisson_chain(double lambda, int i_max) {
  if (!(lambda > 0.0) || i_max < 1)
    throw Error("BAD_ARGUMENT", "counting chain needs lambda > 0, i_max >= 1");
  const int m = i_max + 1;
  std::vector<std::vector<double>> q(m, std::vector<double>(m, 0.0));
  std::vector<std::string> names(m);
  for (int i = 0; i < m; ++i) {
    names[i] = std::to_string(i);
    if (i < i_max) {
      q[i][i + 1] = lambda;
      q[i][i] = -lambda;
    } else {
      q[i][i - 1] = lambda;  // reflecting top level
      q[i][i] = -lambda;
    }
  }
  return CtmcModel::make(std::move(q), std::move(names));
}

}  // namespace riskstop
