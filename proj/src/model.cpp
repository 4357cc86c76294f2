#include "mwcc/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "mwcc/error.hpp"

namespace mwcc {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::validation: return "validation";
    case ErrorCode::parse: return "parse";
    case ErrorCode::budget: return "budget";
    case ErrorCode::io: return "io";
    case ErrorCode::unsupported: return "unsupported";
  }
  return "unknown";
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

namespace {

std::string fmt_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

// Fills fail mass and the nonzero range from the safe entries.
void finalize_row(TransitionRow& row) {
  double sum = 0.0;
  for (double p : row.safe) sum += p;
  row.fail = std::clamp(1.0 - sum, 0.0, 1.0);
  row.first = row.safe.size();
  row.last = 0;
  for (std::size_t j = 0; j < row.safe.size(); ++j) {
    if (row.safe[j] != 0.0) {
      row.first = std::min(row.first, j);
      row.last = j + 1;
    }
  }
  if (row.first > row.last) row.first = row.last = 0;
}

void check_risk_bound(double eps) {
  if (!std::isfinite(eps) || eps < 0.0 || eps > 1.0)
    raise(ErrorCode::validation, "risk_bound " + fmt_double(eps) + " outside [0,1]");
}

}  // namespace

StateIndex GridModel::locate(double x) const {
  const double t = std::floor((x - spec.safe_lo) / cell_width);
  if (!(t >= 0.0)) return 0;
  const auto i = static_cast<std::size_t>(t);
  return std::min(i, cell_centers.size() - 1);
}

Problem Problem::with_risk_bound(double risk_bound) const {
  check_risk_bound(risk_bound);
  Problem copy = *this;
  copy.risk_bound_ = risk_bound;
  return copy;
}

ProblemData Problem::to_data() const {
  ProblemData d;
  d.states = tables_->states;
  d.fail = tables_->fail;
  d.actions = tables_->actions;
  d.kernel.resize(num_states());
  for (StateIndex s = 0; s < num_states(); ++s)
    for (const auto& r : tables_->kernel[s]) d.kernel[s].push_back(r.safe);
  d.stage_cost = tables_->stage_cost;
  d.terminal_cost = tables_->terminal_cost;
  d.horizon = horizon_;
  d.risk_bound = risk_bound_;
  d.initial_state = initial_state_;
  return d;
}

Problem build_problem(ProblemData data) {
  const std::size_t n = data.states.size();
  if (n == 0) raise(ErrorCode::validation, "states: safe set is empty");
  {
    std::set<std::string> seen;
    for (const auto& s : data.states) {
      if (s.empty()) raise(ErrorCode::validation, "states: empty state identifier");
      if (!seen.insert(s).second) raise(ErrorCode::validation, "states: duplicate identifier '" + s + "'");
    }
    if (data.fail.empty()) raise(ErrorCode::validation, "fail: empty identifier");
    if (seen.count(data.fail)) raise(ErrorCode::validation, "fail: '" + data.fail + "' is also a safe state");
  }
  if (data.actions.size() != n) raise(ErrorCode::validation, "actions: expected one action list per state");
  for (std::size_t s = 0; s < n; ++s) {
    if (data.actions[s].empty())
      raise(ErrorCode::validation, "actions: state '" + data.states[s] + "' has no admissible action");
    std::set<std::string> seen;
    for (const auto& a : data.actions[s])
      if (a.empty() || !seen.insert(a).second)
        raise(ErrorCode::validation, "actions: state '" + data.states[s] + "' has an empty or duplicate action '" + a + "'");
  }
  if (data.kernel.size() != n) raise(ErrorCode::validation, "kernel: expected rows for every state");
  if (data.stage_cost.size() != n) raise(ErrorCode::validation, "stage_cost: expected one entry per state");
  if (data.terminal_cost.size() != n) raise(ErrorCode::validation, "terminal_cost: expected one entry per state");
  if (data.horizon < 1) raise(ErrorCode::validation, "horizon must be >= 1");
  check_risk_bound(data.risk_bound);
  if (data.initial_state >= n) raise(ErrorCode::validation, "initial_state does not index a safe state");

  auto tables = std::make_shared<Problem::Tables>();
  tables->kernel.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& acts = data.actions[s];
    if (data.kernel[s].size() != acts.size())
      raise(ErrorCode::validation, "kernel: state '" + data.states[s] + "' needs one row per action");
    if (data.stage_cost[s].size() != acts.size())
      raise(ErrorCode::validation, "stage_cost: state '" + data.states[s] + "' needs one cost per action");
    for (std::size_t a = 0; a < acts.size(); ++a) {
      const std::string tag = "kernel row (" + data.states[s] + "," + acts[a] + ")";
      auto& probs = data.kernel[s][a];
      if (probs.size() != n) raise(ErrorCode::validation, tag + ": expected " + std::to_string(n) + " entries");
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p = probs[j];
        if (!std::isfinite(p) || p < 0.0)
          raise(ErrorCode::validation, tag + ": negative or non-finite probability " + fmt_double(p) +
                                           " towards '" + data.states[j] + "'");
        if (p > 1.0)
          raise(ErrorCode::validation, tag + ": probability " + fmt_double(p) + " towards '" +
                                           data.states[j] + "' exceeds 1");
        sum += p;
      }
      if (sum > 1.0 + kProbabilityTolerance)
        raise(ErrorCode::validation, tag + ": row sums to " + fmt_double(sum) + " > 1");
      if (!std::isfinite(data.stage_cost[s][a]))
        raise(ErrorCode::validation, "stage_cost (" + data.states[s] + "," + acts[a] + ") is not finite");
      TransitionRow row;
      row.safe = std::move(probs);
      finalize_row(row);
      tables->kernel[s].push_back(std::move(row));
    }
    if (!std::isfinite(data.terminal_cost[s]))
      raise(ErrorCode::validation, "terminal_cost (" + data.states[s] + ") is not finite");
  }

  tables->states = std::move(data.states);
  tables->fail = std::move(data.fail);
  tables->actions = std::move(data.actions);
  tables->stage_cost = std::move(data.stage_cost);
  tables->terminal_cost = std::move(data.terminal_cost);
  tables->max_actions = 0;
  for (const auto& acts : tables->actions) tables->max_actions = std::max(tables->max_actions, acts.size());
  tables->uniform_actions = std::all_of(tables->actions.begin(), tables->actions.end(),
                                        [&](const auto& acts) { return acts.size() == tables->max_actions; });

  Problem p;
  p.tables_ = std::move(tables);
  p.horizon_ = data.horizon;
  p.risk_bound_ = data.risk_bound;
  p.initial_state_ = data.initial_state;
  return p;
}

void validate(const ContinuousSpec& c) {
  const double fields[] = {c.drift, c.state_gain, c.action_gain, c.noise_std, c.action_min, c.action_max,
                           c.safe_lo, c.safe_hi, c.stage_state_weight, c.stage_action_weight,
                           c.terminal_state_weight, c.initial_value};
  for (double f : fields)
    if (!std::isfinite(f)) raise(ErrorCode::validation, "continuous: non-finite parameter");
  if (!(c.noise_std > 0.0)) raise(ErrorCode::validation, "continuous: noise_std must be > 0");
  if (c.action_min > c.action_max) raise(ErrorCode::validation, "continuous: action_min > action_max");
  if (!(c.safe_lo < c.safe_hi)) raise(ErrorCode::validation, "continuous: safe interval must satisfy lo < hi");
  if (c.initial_value < c.safe_lo || c.initial_value > c.safe_hi)
    raise(ErrorCode::validation, "continuous: initial_value outside the safe interval");
  if (c.horizon < 1) raise(ErrorCode::validation, "continuous: horizon must be >= 1");
  check_risk_bound(c.risk_bound);
}

void validate(const GridSpec& g) {
  if (g.n_state_cells < 2) raise(ErrorCode::validation, "grid: n_state_cells must be >= 2");
  if (g.n_actions < 2) raise(ErrorCode::validation, "grid: n_actions must be >= 2");
}

Problem discretize(const ContinuousSpec& c, const GridSpec& g) {
  validate(c);
  validate(g);
  const std::size_t n = g.n_state_cells;
  const std::size_t m = g.n_actions;

  GridModel model;
  model.spec = c;
  model.grid = g;
  model.cell_width = (c.safe_hi - c.safe_lo) / static_cast<double>(n);
  std::vector<double> edges(n + 1);
  for (std::size_t l = 0; l <= n; ++l) edges[l] = c.safe_lo + static_cast<double>(l) * model.cell_width;
  edges[n] = c.safe_hi;
  for (std::size_t i = 0; i < n; ++i) model.cell_centers.push_back(0.5 * (edges[i] + edges[i + 1]));
  for (std::size_t j = 0; j < m; ++j)
    model.action_values.push_back(c.action_min + (c.action_max - c.action_min) * static_cast<double>(j) /
                                                     static_cast<double>(m - 1));

  auto tables = std::make_shared<Problem::Tables>();
  tables->fail = "fail";
  for (std::size_t i = 0; i < n; ++i) tables->states.push_back("c" + std::to_string(i));
  std::vector<std::string> action_names;
  for (std::size_t j = 0; j < m; ++j) action_names.push_back("u" + std::to_string(j));
  tables->actions.assign(n, action_names);
  tables->kernel.resize(n);
  tables->stage_cost.resize(n);
  tables->terminal_cost.resize(n);

  std::vector<double> z(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = model.cell_centers[i];
    tables->kernel[i].reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double u = model.action_values[j];
      const double mean = c.drift + c.state_gain * x + c.action_gain * u;
      for (std::size_t l = 0; l <= n; ++l) z[l] = (edges[l] - mean) / c.noise_std;
      TransitionRow row;
      row.safe.resize(n);
      for (std::size_t l = 0; l < n; ++l) {
        // Subtract in whichever tail keeps the difference well conditioned.
        if (z[l] >= 0.0)
          row.safe[l] = normal_sf(z[l]) - normal_sf(z[l + 1]);
        else if (z[l + 1] <= 0.0)
          row.safe[l] = normal_cdf(z[l + 1]) - normal_cdf(z[l]);
        else
          row.safe[l] = 1.0 - normal_cdf(z[l]) - normal_sf(z[l + 1]);
        row.safe[l] = std::max(row.safe[l], 0.0);
      }
      finalize_row(row);
      tables->kernel[i].push_back(std::move(row));
      tables->stage_cost[i].push_back(c.stage_state_weight * x * x + c.stage_action_weight * u * u);
    }
    tables->terminal_cost[i] = c.terminal_state_weight * x * x;
  }
  tables->max_actions = m;
  tables->uniform_actions = true;

  Problem p;
  p.horizon_ = c.horizon;
  p.risk_bound_ = c.risk_bound;
  p.initial_state_ = model.locate(c.initial_value);
  tables->grid = std::move(model);
  p.tables_ = std::move(tables);
  return p;
}

const TransitionRow& transition_row(const Problem& p, StateIndex s, ActionIndex a) {
  if (s >= p.num_states()) raise(ErrorCode::invalid_argument, "state index " + std::to_string(s) + " out of range");
  if (a >= p.num_actions(s))
    raise(ErrorCode::invalid_argument, "action index " + std::to_string(a) + " not admissible at state '" +
                                           p.state_name(s) + "'");
  return p.row(s, a);
}

void validate_policy(const Problem& p, const Policy& pi) {
  if (pi.rules.size() != static_cast<std::size_t>(p.horizon()))
    raise(ErrorCode::invalid_argument, "policy has " + std::to_string(pi.rules.size()) + " rules, horizon is " +
                                           std::to_string(p.horizon()));
  for (std::size_t k = 0; k < pi.rules.size(); ++k) {
    if (pi.rules[k].size() != p.num_states())
      raise(ErrorCode::invalid_argument, "policy rule " + std::to_string(k) + " does not cover every state");
    for (StateIndex s = 0; s < p.num_states(); ++s)
      if (pi.rules[k][s] >= p.num_actions(s))
        raise(ErrorCode::invalid_argument, "policy rule " + std::to_string(k) + " assigns an inadmissible action at '" +
                                               p.state_name(s) + "'");
  }
}

Policy constant_policy(const Problem& p, ActionIndex a) {
  Policy pi;
  pi.rules.assign(static_cast<std::size_t>(p.horizon()), std::vector<ActionIndex>(p.num_states(), a));
  validate_policy(p, pi);
  return pi;
}

}  // namespace mwcc
