#include "riskstop/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "riskstop/house_selling.hpp"
#include "riskstop/ola.hpp"

namespace riskstop {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& ptr,
                               const std::string& what) {
  throw Error("SCHEMA_ERROR", ptr + ": " + what);
}

void check_keys(const json& obj, const std::string& base,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) known = true;
    if (!known) schema_error(base + "/" + it.key(), "unknown key");
  }
}

const json* opt_member(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double as_num(const json& j, const std::string& ptr) {
  if (!j.is_number()) schema_error(ptr, "expected a number");
  return j.get<double>();
}

long as_int(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) schema_error(ptr, "expected an integer");
  return j.get<long>();
}

std::string as_str(const json& j, const std::string& ptr) {
  if (!j.is_string()) schema_error(ptr, "expected a string");
  return j.get<std::string>();
}

const json& as_obj(const json& j, const std::string& ptr) {
  if (!j.is_object()) schema_error(ptr, "expected an object");
  return j;
}

double num_or(const json& obj, const char* key, const std::string& base,
              double def) {
  const json* j = opt_member(obj, key);
  return j ? as_num(*j, base + "/" + key) : def;
}

long int_or(const json& obj, const char* key, const std::string& base,
            long def) {
  const json* j = opt_member(obj, key);
  return j ? as_int(*j, base + "/" + key) : def;
}

bool bool_or(const json& obj, const char* key, const std::string& base,
             bool def) {
  const json* j = opt_member(obj, key);
  if (!j) return def;
  if (!j->is_boolean()) schema_error(base + "/" + key, "expected a boolean");
  return j->get<bool>();
}

std::vector<double> num_array(const json& j, const std::string& ptr) {
  if (!j.is_array()) schema_error(ptr, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t k = 0; k < j.size(); ++k)
    out.push_back(as_num(j[k], ptr + "/" + std::to_string(k)));
  return out;
}

Utility parse_utility(const json& j, const std::string& ptr) {
  const json& obj = as_obj(j, ptr);
  check_keys(obj, ptr, {"family", "gamma", "d", "p"});
  const json* fam = opt_member(obj, "family");
  if (!fam) schema_error(ptr + "/family", "required");
  std::string f = as_str(*fam, ptr + "/family");
  try {
    if (f == "linear") return Utility::linear();
    if (f == "exponential" || f == "exp") {
      const json* g = opt_member(obj, "gamma");
      if (!g) schema_error(ptr + "/gamma", "required for exponential");
      return Utility::exponential(as_num(*g, ptr + "/gamma"));
    }
    if (f == "logarithmic" || f == "log")
      return Utility::logarithmic(num_or(obj, "d", ptr, 0.0));
    if (f == "power") {
      const json* p = opt_member(obj, "p");
      if (!p) schema_error(ptr + "/p", "required for power");
      return Utility::power(as_num(*p, ptr + "/p"),
                            num_or(obj, "d", ptr, 0.0));
    }
  } catch (const Error& e) {
    if (std::string(e.code()) == "BAD_UTILITY_PARAM")
      schema_error(ptr, e.what());
    throw;
  }
  schema_error(ptr + "/family",
               "expected linear, exponential, logarithmic or power");
}

void parse_model(const json& j, ParsedConfig& cfg) {
  const std::string base = "/model";
  const json& obj = as_obj(j, base);
  check_keys(obj, base, {"states", "Q", "g"});
  std::vector<std::string> names;
  if (const json* s = opt_member(obj, "states")) {
    if (!s->is_array()) schema_error(base + "/states", "expected an array");
    for (std::size_t k = 0; k < s->size(); ++k)
      names.push_back(as_str((*s)[k], base + "/states/" + std::to_string(k)));
  }
  const json* q = opt_member(obj, "Q");
  if (!q) schema_error(base + "/Q", "required");
  if (!q->is_array() || q->empty())
    schema_error(base + "/Q", "expected a nonempty matrix");
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < q->size(); ++r)
    rows.push_back(num_array((*q)[r], base + "/Q/" + std::to_string(r)));
  const json* g = opt_member(obj, "g");
  if (!g) schema_error(base + "/g", "required");
  cfg.g = num_array(*g, base + "/g");
  if (cfg.g.size() != rows.size())
    schema_error(base + "/g", "size must match Q");
  ValidationReport report;
  std::optional<CtmcModel> model =
      CtmcModel::validate(std::move(rows), std::move(names), &report);
  if (!model) schema_error(base + "/Q", report.to_string());
  cfg.model = std::move(model);
}

void parse_poisson(const json& j, ParsedConfig& cfg) {
  const std::string base = "/poisson";
  const json& obj = as_obj(j, base);
  check_keys(obj, base, {"lambda", "i_max", "g"});
  PoissonSpec ps;
  const json* lam = opt_member(obj, "lambda");
  if (!lam) schema_error(base + "/lambda", "required");
  ps.lambda = as_num(*lam, base + "/lambda");
  ps.i_max = static_cast<int>(int_or(obj, "i_max", base, ps.i_max));
  const json* g = opt_member(obj, "g");
  if (!g) schema_error(base + "/g", "required");
  if (g->is_string()) {
    if (g->get<std::string>() != "sqrt")
      schema_error(base + "/g", "expected \"sqrt\" or a number array");
    ps.g_sqrt = true;
  } else {
    ps.g = num_array(*g, base + "/g");
    if (opt_member(obj, "i_max") &&
        ps.i_max != static_cast<int>(ps.g.size()) - 1)
      schema_error(base + "/i_max", "conflicts with the g table length");
    ps.i_max = static_cast<int>(ps.g.size()) - 1;
  }
  if (ps.i_max < 1) schema_error(base + "/i_max", "must be >= 1");
  cfg.poisson = std::move(ps);
}

ParsedConfig parse_config(const json& root) {
  const json& top = as_obj(root, "");
  check_keys(top, "",
             {"schema", "name", "cost", "t_offset", "utility", "model",
              "house", "poisson", "grid", "solver", "exp", "ola", "sim",
              "tail", "compare"});
  ParsedConfig cfg;
  const json* schema = opt_member(top, "schema");
  if (!schema) schema_error("/schema", "required");
  if (as_int(*schema, "/schema") != 1)
    schema_error("/schema", "unsupported version (expected 1)");
  if (const json* n = opt_member(top, "name")) cfg.name = as_str(*n, "/name");
  cfg.cost = num_or(top, "cost", "", cfg.cost);
  cfg.t_offset = num_or(top, "t_offset", "", cfg.t_offset);
  if (const json* u = opt_member(top, "utility"))
    cfg.utility = parse_utility(*u, "/utility");

  int sources = 0;
  if (const json* m = opt_member(top, "model")) {
    parse_model(*m, cfg);
    ++sources;
  }
  if (const json* h = opt_member(top, "house")) {
    const json& obj = as_obj(*h, "/house");
    check_keys(obj, "/house", {"alpha"});
    const json* a = opt_member(obj, "alpha");
    if (!a) schema_error("/house/alpha", "required");
    cfg.house_alpha = num_array(*a, "/house/alpha");
    ++sources;
  }
  if (const json* p = opt_member(top, "poisson")) {
    parse_poisson(*p, cfg);
    ++sources;
  }
  if (sources > 1)
    schema_error("", "model, house and poisson are mutually exclusive");

  if (const json* g = opt_member(top, "grid")) {
    const json& obj = as_obj(*g, "/grid");
    check_keys(obj, "/grid", {"t_max", "dt"});
    cfg.grid.t_max = num_or(obj, "t_max", "/grid", cfg.grid.t_max);
    cfg.grid.dt = num_or(obj, "dt", "/grid", cfg.grid.dt);
  }
  if (const json* s = opt_member(top, "solver")) {
    const json& obj = as_obj(*s, "/solver");
    check_keys(obj, "/solver", {"tol", "max_iter", "stages", "refine_argmax"});
    cfg.solver.tol = num_or(obj, "tol", "/solver", cfg.solver.tol);
    cfg.solver.max_iter = static_cast<int>(
        int_or(obj, "max_iter", "/solver", cfg.solver.max_iter));
    cfg.solver.stages =
        static_cast<int>(int_or(obj, "stages", "/solver", cfg.solver.stages));
    cfg.solver.refine_argmax =
        bool_or(obj, "refine_argmax", "/solver", cfg.solver.refine_argmax);
  }
  if (const json* e = opt_member(top, "exp")) {
    const json& obj = as_obj(*e, "/exp");
    check_keys(obj, "/exp", {"tol", "max_iter"});
    cfg.exp.tol = num_or(obj, "tol", "/exp", cfg.exp.tol);
    cfg.exp.max_iter = int_or(obj, "max_iter", "/exp", cfg.exp.max_iter);
  }
  if (const json* o = opt_member(top, "ola")) {
    const json& obj = as_obj(*o, "/ola");
    check_keys(obj, "/ola", {"t", "method", "theta_step", "horizon_factor"});
    cfg.ola.t = num_or(obj, "t", "/ola", cfg.ola.t);
    if (const json* m = opt_member(obj, "method")) {
      std::string v = as_str(*m, "/ola/method");
      if (v != "analytic" && v != "grid")
        schema_error("/ola/method", "expected analytic or grid");
      cfg.ola.grid_method = v == "grid";
    }
    cfg.ola.theta_step =
        num_or(obj, "theta_step", "/ola", cfg.ola.theta_step);
    cfg.ola.horizon_factor =
        num_or(obj, "horizon_factor", "/ola", cfg.ola.horizon_factor);
  }
  if (const json* s = opt_member(top, "sim")) {
    const json& obj = as_obj(*s, "/sim");
    check_keys(obj, "/sim",
               {"n_paths", "seed", "max_jumps", "threads", "initial_state"});
    cfg.sim.n_paths = int_or(obj, "n_paths", "/sim", cfg.sim.n_paths);
    if (const json* seed = opt_member(obj, "seed")) {
      if (!seed->is_number_unsigned() && !seed->is_number_integer())
        schema_error("/sim/seed", "expected a nonnegative integer");
      if (seed->is_number_integer() && seed->get<long long>() < 0)
        schema_error("/sim/seed", "expected a nonnegative integer");
      cfg.sim.seed = seed->get<std::uint64_t>();
    }
    cfg.sim.max_jumps = static_cast<int>(
        int_or(obj, "max_jumps", "/sim", cfg.sim.max_jumps));
    cfg.sim.threads =
        static_cast<int>(int_or(obj, "threads", "/sim", cfg.sim.threads));
    if (const json* is = opt_member(obj, "initial_state")) {
      if (is->is_string())
        cfg.sim.initial_state_name = is->get<std::string>();
      else
        cfg.sim.initial_state = static_cast<int>(
            as_int(*is, "/sim/initial_state"));
    }
  }
  if (const json* t = opt_member(top, "tail")) {
    const json& obj = as_obj(*t, "/tail");
    check_keys(obj, "/tail", {"n_list"});
    if (const json* nl = opt_member(obj, "n_list")) {
      if (!nl->is_array()) schema_error("/tail/n_list", "expected an array");
      cfg.tail.n_list.clear();
      for (std::size_t k = 0; k < nl->size(); ++k)
        cfg.tail.n_list.push_back(static_cast<int>(
            as_int((*nl)[k], "/tail/n_list/" + std::to_string(k))));
    }
  }
  if (const json* c = opt_member(top, "compare")) {
    const json& obj = as_obj(*c, "/compare");
    check_keys(obj, "/compare", {"utility", "slack", "n_paths"});
    if (const json* u = opt_member(obj, "utility"))
      cfg.compare.utility = parse_utility(*u, "/compare/utility");
    cfg.compare.slack = num_or(obj, "slack", "/compare", cfg.compare.slack);
    cfg.compare.n_paths =
        int_or(obj, "n_paths", "/compare", cfg.compare.n_paths);
  }
  return cfg;
}

json utility_json(const Utility& u) {
  json j;
  switch (u.family()) {
    case UtilityFamily::linear:
      j["family"] = "linear";
      break;
    case UtilityFamily::exponential:
      j["family"] = "exponential";
      j["gamma"] = u.gamma();
      break;
    case UtilityFamily::logarithmic:
      j["family"] = "logarithmic";
      j["d"] = u.domain_left();
      break;
    case UtilityFamily::power:
      j["family"] = "power";
      j["p"] = u.p();
      j["d"] = u.domain_left();
      break;
  }
  return j;
}

}  // namespace

const Utility& ParsedConfig::require_utility() const {
  if (!utility) schema_error("/utility", "required for this command");
  return *utility;
}

StoppingProblem ParsedConfig::build_problem() const {
  const Utility& u = require_utility();
  if (model) return StoppingProblem(*model, g, cost, u, t_offset);
  if (!house_alpha.empty())
    return make_house_problem(house_alpha, cost, u, t_offset);
  if (poisson) {
    CtmcModel chain = make_poisson_chain(poisson->lambda, poisson->i_max);
    std::vector<double> reward = poisson->g;
    if (poisson->g_sqrt) {
      reward.resize(poisson->i_max + 1);
      for (int i = 0; i <= poisson->i_max; ++i)
        reward[i] = std::sqrt(static_cast<double>(i));
    }
    return StoppingProblem(std::move(chain), std::move(reward), cost, u,
                           t_offset);
  }
  schema_error("", "one of model, house or poisson is required");
}

int ParsedConfig::initial_state(const CtmcModel& m) const {
  if (!sim.initial_state_name.empty()) {
    int idx = m.index_of(sim.initial_state_name);
    if (idx < 0)
      schema_error("/sim/initial_state",
                   "unknown state " + sim.initial_state_name);
    return idx;
  }
  if (sim.initial_state < 0 || sim.initial_state >= m.num_states())
    schema_error("/sim/initial_state", "index out of range");
  return sim.initial_state;
}

ParsedConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("SCHEMA_ERROR", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(root);
}

ParsedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("FILE_ERROR", "cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string resolved_config_json(const ParsedConfig& cfg) {
  json j;
  j["schema"] = cfg.schema;
  j["name"] = cfg.name;
  j["cost"] = cfg.cost;
  j["t_offset"] = cfg.t_offset;
  if (cfg.utility) j["utility"] = utility_json(*cfg.utility);
  if (cfg.model) {
    j["model"]["states"] = cfg.model->state_names();
    j["model"]["Q"] = cfg.model->generator();
    j["model"]["g"] = cfg.g;
  }
  if (!cfg.house_alpha.empty()) j["house"]["alpha"] = cfg.house_alpha;
  if (cfg.poisson) {
    j["poisson"]["lambda"] = cfg.poisson->lambda;
    j["poisson"]["i_max"] = cfg.poisson->i_max;
    if (cfg.poisson->g_sqrt)
      j["poisson"]["g"] = "sqrt";
    else
      j["poisson"]["g"] = cfg.poisson->g;
  }
  j["grid"] = {{"t_max", cfg.grid.t_max}, {"dt", cfg.grid.dt}};
  j["solver"] = {{"tol", cfg.solver.tol},
                 {"max_iter", cfg.solver.max_iter},
                 {"stages", cfg.solver.stages},
                 {"refine_argmax", cfg.solver.refine_argmax}};
  j["exp"] = {{"tol", cfg.exp.tol}, {"max_iter", cfg.exp.max_iter}};
  j["ola"] = {{"t", cfg.ola.t},
              {"method", cfg.ola.grid_method ? "grid" : "analytic"},
              {"theta_step", cfg.ola.theta_step},
              {"horizon_factor", cfg.ola.horizon_factor}};
  j["sim"] = {{"n_paths", cfg.sim.n_paths},
              {"seed", cfg.sim.seed},
              {"max_jumps", cfg.sim.max_jumps},
              {"threads", cfg.sim.threads}};
  if (!cfg.sim.initial_state_name.empty())
    j["sim"]["initial_state"] = cfg.sim.initial_state_name;
  else
    j["sim"]["initial_state"] = cfg.sim.initial_state;
  j["tail"] = {{"n_list", cfg.tail.n_list}};
  j["compare"] = {{"slack", cfg.compare.slack},
                  {"n_paths", cfg.compare.n_paths}};
  if (cfg.compare.utility)
    j["compare"]["utility"] = utility_json(*cfg.compare.utility);
  return j.dump(2);
}

std::string fmt_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return std::string(buf, ptr);
}

void write_value_csv(std::ostream& os, const StoppingProblem& p,
                     const ValueField& value, const StoppingRule& rule) {
  const TimeGrid& grid = value.grid();
  os << "t,state,value,h_star\n";
  for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
    int ki = static_cast<int>(k);
    for (int i = 0; i < value.num_states(); ++i) {
      os << fmt_double(grid.t(ki)) << ',' << p.model().name(i) << ','
         << fmt_double(value.at(i, ki)) << ','
         << fmt_double(rule.wait(i, ki)) << '\n';
    }
  }
}

void write_exp_csv(std::ostream& os, const StoppingProblem& p,
                   const std::vector<double>& w,
                   const std::vector<bool>& stop) {
  os << "W,state,f_star\n";
  for (std::size_t i = 0; i < w.size(); ++i) {
    os << fmt_double(w[i]) << ',' << p.model().name(static_cast<int>(i))
       << ',' << (stop[i] ? "0" : "inf") << '\n';
  }
}

}  // namespace riskstop
