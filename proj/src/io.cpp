#include "mwcc/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mwcc/error.hpp"

namespace mwcc {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) raise(ErrorCode::validation, where + ": unknown key '" + it.key() + "'");
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) raise(ErrorCode::validation, where + ": missing key '" + key + "'");
  return *it;
}

double as_number(const json& v, const std::string& field) {
  if (!v.is_number()) raise(ErrorCode::validation, field + ": expected a number");
  return v.get<double>();
}

std::string as_string(const json& v, const std::string& field) {
  if (!v.is_string()) raise(ErrorCode::validation, field + ": expected a string");
  return v.get<std::string>();
}

std::size_t as_count(const json& v, const std::string& field) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    raise(ErrorCode::validation, field + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1, column = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    raise(ErrorCode::parse, "JSON syntax error at line " + std::to_string(line) + ", column " +
                                std::to_string(column) + ": " + e.what());
  }
}

ContinuousSpec parse_continuous(const json& c, GridSpec& grid) {
  if (!c.is_object()) raise(ErrorCode::validation, "continuous: expected an object");
  reject_unknown_keys(c,
                      {"drift", "state_gain", "action_gain", "noise_std", "action_min", "action_max", "safe_lo",
                       "safe_hi", "stage_state_weight", "stage_action_weight", "terminal_state_weight", "horizon",
                       "risk_bound", "initial_value", "grid"},
                      "continuous");
  ContinuousSpec spec;
  auto num = [&](const char* key, double& field, bool required) {
    auto it = c.find(key);
    if (it == c.end()) {
      if (required) raise(ErrorCode::validation, std::string("continuous: missing key '") + key + "'");
      return;
    }
    field = as_number(*it, std::string("continuous.") + key);
  };
  num("drift", spec.drift, false);
  num("state_gain", spec.state_gain, false);
  num("action_gain", spec.action_gain, false);
  num("noise_std", spec.noise_std, true);
  num("action_min", spec.action_min, true);
  num("action_max", spec.action_max, true);
  num("safe_lo", spec.safe_lo, true);
  num("safe_hi", spec.safe_hi, true);
  num("stage_state_weight", spec.stage_state_weight, false);
  num("stage_action_weight", spec.stage_action_weight, false);
  num("terminal_state_weight", spec.terminal_state_weight, false);
  num("risk_bound", spec.risk_bound, true);
  num("initial_value", spec.initial_value, true);
  const json& h = require(c, "horizon", "continuous");
  if (!h.is_number_integer()) raise(ErrorCode::validation, "continuous.horizon: expected an integer");
  spec.horizon = h.get<int>();
  if (auto g = c.find("grid"); g != c.end()) {
    if (!g->is_object()) raise(ErrorCode::validation, "continuous.grid: expected an object");
    reject_unknown_keys(*g, {"cells", "actions"}, "continuous.grid");
    if (auto it = g->find("cells"); it != g->end()) grid.n_state_cells = as_count(*it, "continuous.grid.cells");
    if (auto it = g->find("actions"); it != g->end()) grid.n_actions = as_count(*it, "continuous.grid.actions");
  }
  return spec;
}

Problem parse_tabular(const json& doc) {
  ProblemData d;
  const json& states = require(doc, "states", "problem");
  if (!states.is_array()) raise(ErrorCode::validation, "states: expected an array");
  std::map<std::string, StateIndex> state_index;
  for (const auto& s : states) {
    d.states.push_back(as_string(s, "states[]"));
    state_index.emplace(d.states.back(), d.states.size() - 1);
  }
  if (auto it = doc.find("fail"); it != doc.end()) d.fail = as_string(*it, "fail");
  const std::size_t n = d.states.size();

  auto lookup_state = [&](const json& v, const std::string& field) {
    const std::string name = as_string(v, field);
    auto it = state_index.find(name);
    if (it == state_index.end()) raise(ErrorCode::validation, field + ": unknown state '" + name + "'");
    return it->second;
  };

  const json& actions = require(doc, "actions", "problem");
  d.actions.resize(n);
  if (actions.is_array()) {
    std::vector<std::string> shared;
    for (const auto& a : actions) shared.push_back(as_string(a, "actions[]"));
    d.actions.assign(n, shared);
  } else if (actions.is_object()) {
    for (auto it = actions.begin(); it != actions.end(); ++it) {
      const StateIndex s = lookup_state(json(it.key()), "actions");
      if (!it->is_array()) raise(ErrorCode::validation, "actions." + it.key() + ": expected an array");
      for (const auto& a : *it) d.actions[s].push_back(as_string(a, "actions." + it.key() + "[]"));
    }
  } else {
    raise(ErrorCode::validation, "actions: expected an array or an object keyed by state");
  }
  auto lookup_action = [&](StateIndex s, const json& v, const std::string& field) {
    const std::string name = as_string(v, field);
    const auto& acts = d.actions[s];
    for (std::size_t a = 0; a < acts.size(); ++a)
      if (acts[a] == name) return a;
    raise(ErrorCode::validation, field + ": action '" + name + "' is not admissible at '" + d.states[s] + "'");
  };

  const json& kernel = require(doc, "kernel", "problem");
  if (!kernel.is_array()) raise(ErrorCode::validation, "kernel: expected an array of rows");
  d.kernel.resize(n);
  std::vector<std::vector<char>> seen(n);
  for (StateIndex s = 0; s < n; ++s) {
    d.kernel[s].assign(d.actions[s].size(), std::vector<double>(n, 0.0));
    seen[s].assign(d.actions[s].size(), 0);
  }
  for (const auto& row : kernel) {
    if (!row.is_object()) raise(ErrorCode::validation, "kernel: each row must be an object");
    reject_unknown_keys(row, {"state", "action", "next"}, "kernel row");
    const StateIndex s = lookup_state(require(row, "state", "kernel row"), "kernel row state");
    const std::size_t a = lookup_action(s, require(row, "action", "kernel row"), "kernel row action");
    const std::string tag = "kernel row (" + d.states[s] + "," + d.actions[s][a] + ")";
    if (seen[s][a]) raise(ErrorCode::validation, tag + ": duplicate row");
    seen[s][a] = 1;
    const json& next = require(row, "next", tag);
    if (!next.is_object()) raise(ErrorCode::validation, tag + ": 'next' must map states to probabilities");
    for (auto it = next.begin(); it != next.end(); ++it) {
      const StateIndex j = lookup_state(json(it.key()), tag + " next");
      d.kernel[s][a][j] = as_number(*it, tag + " next." + it.key());
    }
  }
  for (StateIndex s = 0; s < n; ++s)
    for (std::size_t a = 0; a < d.actions[s].size(); ++a)
      if (!seen[s][a])
        raise(ErrorCode::validation, "kernel row (" + d.states[s] + "," + d.actions[s][a] + ") is missing");

  const json& stage_cost = require(doc, "stage_cost", "problem");
  if (!stage_cost.is_object()) raise(ErrorCode::validation, "stage_cost: expected an object keyed by state");
  d.stage_cost.resize(n);
  for (StateIndex s = 0; s < n; ++s) {
    auto it = stage_cost.find(d.states[s]);
    if (it == stage_cost.end() || !it->is_object())
      raise(ErrorCode::validation, "stage_cost: missing costs for state '" + d.states[s] + "'");
    for (const auto& a : d.actions[s]) {
      auto c = it->find(a);
      if (c == it->end()) raise(ErrorCode::validation, "stage_cost (" + d.states[s] + "," + a + ") is missing");
      d.stage_cost[s].push_back(as_number(*c, "stage_cost." + d.states[s] + "." + a));
    }
    if (it->size() != d.actions[s].size())
      raise(ErrorCode::validation, "stage_cost." + d.states[s] + ": costs for unknown actions");
  }
  for (auto it = stage_cost.begin(); it != stage_cost.end(); ++it) lookup_state(json(it.key()), "stage_cost");

  const json& terminal = require(doc, "terminal_cost", "problem");
  if (!terminal.is_object()) raise(ErrorCode::validation, "terminal_cost: expected an object keyed by state");
  d.terminal_cost.assign(n, 0.0);
  for (StateIndex s = 0; s < n; ++s) {
    auto it = terminal.find(d.states[s]);
    if (it == terminal.end()) raise(ErrorCode::validation, "terminal_cost: missing state '" + d.states[s] + "'");
    d.terminal_cost[s] = as_number(*it, "terminal_cost." + d.states[s]);
  }
  for (auto it = terminal.begin(); it != terminal.end(); ++it) lookup_state(json(it.key()), "terminal_cost");

  const json& horizon = require(doc, "horizon", "problem");
  if (!horizon.is_number_integer()) raise(ErrorCode::validation, "horizon: expected an integer");
  d.horizon = horizon.get<int>();
  d.risk_bound = as_number(require(doc, "risk_bound", "problem"), "risk_bound");
  d.initial_state = lookup_state(require(doc, "initial_state", "problem"), "initial_state");
  return build_problem(std::move(d));
}

}  // namespace

std::string format_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Problem parse_problem(std::string_view json_text) {
  const json doc = parse_json(json_text);
  if (!doc.is_object()) raise(ErrorCode::validation, "problem: top level must be an object");
  if (auto v = doc.find("schema_version"); v != doc.end())
    if (!v->is_number_integer() || v->get<int>() != kSchemaVersion)
      raise(ErrorCode::validation, "schema_version: unsupported version");
  if (doc.contains("continuous")) {
    reject_unknown_keys(doc, {"schema_version", "name", "continuous"}, "problem");
    GridSpec grid;
    const ContinuousSpec spec = parse_continuous(doc["continuous"], grid);
    return discretize(spec, grid);
  }
  reject_unknown_keys(doc,
                      {"schema_version", "name", "states", "fail", "actions", "kernel", "stage_cost",
                       "terminal_cost", "horizon", "risk_bound", "initial_state"},
                      "problem");
  return parse_tabular(doc);
}

Problem load_problem(const std::string& path) { return parse_problem(read_text_file(path)); }

std::string problem_to_json(const Problem& p) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  json states = json::array();
  for (StateIndex s = 0; s < p.num_states(); ++s) states.push_back(p.state_name(s));
  doc["states"] = states;
  doc["fail"] = p.fail_name();
  json actions = json::object();
  json kernel = json::array();
  json stage_cost = json::object();
  json terminal = json::object();
  for (StateIndex s = 0; s < p.num_states(); ++s) {
    const std::string& name = p.state_name(s);
    json acts = json::array();
    json costs = json::object();
    for (ActionIndex a = 0; a < p.num_actions(s); ++a) {
      acts.push_back(p.action_name(s, a));
      costs[p.action_name(s, a)] = p.stage_cost(s, a);
      json next = json::object();
      const TransitionRow& row = p.row(s, a);
      for (std::size_t j = row.first; j < row.last; ++j)
        if (row.safe[j] != 0.0) next[p.state_name(j)] = row.safe[j];
      kernel.push_back({{"state", name}, {"action", p.action_name(s, a)}, {"next", next}});
    }
    actions[name] = acts;
    stage_cost[name] = costs;
    terminal[name] = p.terminal_cost(s);
  }
  doc["actions"] = actions;
  doc["kernel"] = kernel;
  doc["stage_cost"] = stage_cost;
  doc["terminal_cost"] = terminal;
  doc["horizon"] = p.horizon();
  doc["risk_bound"] = p.risk_bound();
  doc["initial_state"] = p.state_name(p.initial_state());
  return doc.dump(1);
}

Policy parse_policy(const Problem& p, std::string_view json_text) {
  const json doc = parse_json(json_text);
  if (!doc.is_object()) raise(ErrorCode::validation, "policy: top level must be an object");
  reject_unknown_keys(doc, {"rules"}, "policy");
  const json& rules = require(doc, "rules", "policy");
  if (!rules.is_array()) raise(ErrorCode::validation, "policy.rules: expected an array");
  if (rules.size() != static_cast<std::size_t>(p.horizon()))
    raise(ErrorCode::validation, "policy.rules: expected " + std::to_string(p.horizon()) + " rules, got " +
                                     std::to_string(rules.size()));
  Policy pi;
  for (std::size_t k = 0; k < rules.size(); ++k) {
    const json& rule = rules[k];
    const std::string where = "policy.rules[" + std::to_string(k) + "]";
    if (!rule.is_object()) raise(ErrorCode::validation, where + ": expected an object keyed by state");
    std::vector<ActionIndex> actions(p.num_states(), kNoAction);
    for (StateIndex s = 0; s < p.num_states(); ++s) {
      auto it = rule.find(p.state_name(s));
      if (it == rule.end()) raise(ErrorCode::validation, where + ": no action for state '" + p.state_name(s) + "'");
      const std::string name = as_string(*it, where + "." + p.state_name(s));
      for (ActionIndex a = 0; a < p.num_actions(s); ++a)
        if (p.action_name(s, a) == name) actions[s] = a;
      if (actions[s] == kNoAction)
        raise(ErrorCode::validation, where + ": action '" + name + "' not admissible at '" + p.state_name(s) + "'");
    }
    if (rule.size() != p.num_states()) raise(ErrorCode::validation, where + ": unknown states");
    pi.rules.push_back(std::move(actions));
  }
  validate_policy(p, pi);
  return pi;
}

Policy load_policy(const Problem& p, const std::string& path) { return parse_policy(p, read_text_file(path)); }

std::string policy_to_json(const Problem& p, const Policy& pi) {
  json rules = json::array();
  for (const auto& rule : pi.rules) {
    json r = json::object();
    for (StateIndex s = 0; s < rule.size(); ++s) r[p.state_name(s)] = p.action_name(s, rule[s]);
    rules.push_back(r);
  }
  return json{{"rules", rules}}.dump(1);
}

std::string policy_string(const Problem& p, const Policy& pi) {
  std::string out;
  for (std::size_t k = 0; k < pi.rules.size(); ++k) {
    if (k) out += '|';
    for (StateIndex s = 0; s < pi.rules[k].size(); ++s) {
      if (s) out += ',';
      out += p.action_name(s, pi.rules[k][s]);
    }
  }
  return out;
}

std::string safety_table_csv(const Problem& p, const SafetyValueTable& table) {
  std::ostringstream os;
  os << "stage,state,value\n";
  for (std::size_t k = 0; k < table.values.size(); ++k)
    for (StateIndex s = 0; s < table.values[k].size(); ++s)
      os << k << ',' << p.state_name(s) << ',' << format_double(table.values[k][s]) << '\n';
  return os.str();
}

std::string safety_table_json(const Problem& p, const SafetyValueTable& table) {
  json states = json::array();
  for (StateIndex s = 0; s < p.num_states(); ++s) states.push_back(p.state_name(s));
  return json{{"states", states}, {"values", table.values}, {"mwps", table.at_initial(p)}}.dump(1);
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "lambda,delta,objective,cost,mwps,policy_id\n";
  for (const auto& r : rows)
    os << format_double(r.lambda) << ',' << format_double(r.delta) << ',' << format_double(r.objective) << ','
       << format_double(r.cost) << ',' << format_double(r.mwps) << ',' << policy_id(r.policy) << '\n';
  return os.str();
}

std::string sweep_json(const Problem& p, const std::vector<SweepRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"lambda", r.lambda},
                   {"delta", r.delta},
                   {"objective", r.objective},
                   {"cost", r.cost},
                   {"mwps", r.mwps},
                   {"policy_id", policy_id(r.policy)},
                   {"policy", json::parse(policy_to_json(p, r.policy))["rules"]}});
  }
  return out.dump(1);
}

std::string oracle_csv(const Problem& p, const OracleResult& result) {
  std::ostringstream os;
  os << "policy,cost,mwps,feasible\n";
  for (const auto& row : result.rows)
    os << policy_string(p, policy_at(p, row.index)) << ',' << format_double(row.cost) << ','
       << format_double(row.mwps) << ',' << (result.feasible(row) ? 1 : 0) << '\n';
  return os.str();
}

std::string solve_report_json(const Problem& p, const SolveReport& r) {
  json policy = json::array();
  if (r.feasible)
    for (const auto& [stage, node, state, action] : visited_entries(p, r.policy))
      policy.push_back({{"stage", stage},
                        {"node", node},
                        {"state", p.state_name(state)},
                        {"action", p.action_name(state, action)}});
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["mode"] = mode_name(r.mode);
  doc["verdict"] = r.feasible ? "feasible" : "infeasible";
  doc["value"] = r.feasible ? json(r.value) : json(nullptr);
  doc["risk_bound"] = r.risk_bound;
  doc["horizon"] = p.horizon();
  doc["initial_state"] = p.state_name(p.initial_state());
  auto metric = [&](double v) { return r.feasible ? json(v) : json(nullptr); };
  doc["expected_cost"] = metric(r.expected_cost);
  doc["internal_mwps"] = metric(r.internal_mwps);
  doc["closed_loop_mwps"] = metric(r.closed_loop_mwps);
  doc["closed_loop_mwps_backward"] = metric(r.closed_loop_mwps_backward);
  doc["mwps_discrepancy"] = r.feasible && r.mwps_discrepancy;
  doc["node_counts"] = r.node_counts;
  doc["num_states"] = r.num_states;
  doc["policy"] = policy;
  return doc.dump(1);
}

std::optional<ContinuousSpec> casestudy_spec(std::string_view variant) {
  ContinuousSpec c;
  c.noise_std = 0.01;  // variance 1e-4
  c.action_min = -0.1;
  c.action_max = 0.1;
  c.safe_lo = -1.0;
  c.safe_hi = 1.0;
  c.horizon = 2;
  c.risk_bound = 0.1;
  c.initial_value = 0.5;
  if (variant == "nominal") return c;
  if (variant == "risk-active") {
    c.noise_std = 0.05;
    c.initial_value = 0.9;
    return c;
  }
  return std::nullopt;
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::io, "cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) raise(ErrorCode::io, "failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::io, "cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace mwcc
