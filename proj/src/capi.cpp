#include "mwcc/mwcc.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "mwcc/augmented.hpp"
#include "mwcc/error.hpp"
#include "mwcc/io.hpp"
#include "mwcc/model.hpp"
#include "mwcc/oracle.hpp"
#include "mwcc/penalty.hpp"
#include "mwcc/safety.hpp"
#include "mwcc/simulate.hpp"

struct mwcc_problem {
  mwcc::Problem value;
};
struct mwcc_policy {
  mwcc::Policy value;
};
struct mwcc_solve_report {
  mwcc::SolveReport value;
};
struct mwcc_oracle {
  mwcc::Problem problem;
  mwcc::OracleResult value;
};

namespace {

thread_local std::string last_error;

mwcc_status to_status(mwcc::ErrorCode code) {
  switch (code) {
    case mwcc::ErrorCode::invalid_argument: return MWCC_E_INVALID_ARGUMENT;
    case mwcc::ErrorCode::validation: return MWCC_E_VALIDATION;
    case mwcc::ErrorCode::parse: return MWCC_E_PARSE;
    case mwcc::ErrorCode::budget: return MWCC_E_BUDGET;
    case mwcc::ErrorCode::io: return MWCC_E_IO;
    case mwcc::ErrorCode::unsupported: return MWCC_E_UNSUPPORTED;
  }
  return MWCC_E_INTERNAL;
}

template <class F>
mwcc_status guarded(F&& body) noexcept {
  try {
    body();
    return MWCC_OK;
  } catch (const mwcc::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return MWCC_E_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return MWCC_E_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return MWCC_E_INTERNAL;
  }
}

template <class T>
void need(const T* ptr, const char* what) {
  if (ptr == nullptr) mwcc::raise(mwcc::ErrorCode::invalid_argument, std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

mwcc::PenaltySpec to_spec(const mwcc_penalty& z) {
  switch (z.kind) {
    case MWCC_PENALTY_AFFINE: return mwcc::AffinePenalty{z.slope, z.offset};
    case MWCC_PENALTY_EXACT: return mwcc::ExactPenalty{z.risk_bound};
  }
  mwcc::raise(mwcc::ErrorCode::invalid_argument, "unknown penalty kind " + std::to_string(static_cast<int>(z.kind)));
}

mwcc::ContinuousSpec from_c(const mwcc_continuous_spec& c) {
  mwcc::ContinuousSpec s;
  s.drift = c.drift;
  s.state_gain = c.state_gain;
  s.action_gain = c.action_gain;
  s.noise_std = c.noise_std;
  s.action_min = c.action_min;
  s.action_max = c.action_max;
  s.safe_lo = c.safe_lo;
  s.safe_hi = c.safe_hi;
  s.stage_state_weight = c.stage_state_weight;
  s.stage_action_weight = c.stage_action_weight;
  s.terminal_state_weight = c.terminal_state_weight;
  s.horizon = c.horizon;
  s.risk_bound = c.risk_bound;
  s.initial_value = c.initial_value;
  return s;
}

mwcc_continuous_spec to_c(const mwcc::ContinuousSpec& s) {
  return mwcc_continuous_spec{s.drift,
                              s.state_gain,
                              s.action_gain,
                              s.noise_std,
                              s.action_min,
                              s.action_max,
                              s.safe_lo,
                              s.safe_hi,
                              s.stage_state_weight,
                              s.stage_action_weight,
                              s.terminal_state_weight,
                              s.horizon,
                              s.risk_bound,
                              s.initial_value};
}

mwcc_rollout_summary to_c(const mwcc::RolloutSummary& r) {
  return mwcc_rollout_summary{r.rollouts, r.mean_cost, r.cost_std_error, r.safety_fraction, r.safety_std_error};
}

mwcc::PropagationMode to_mode(mwcc_mode mode) {
  switch (mode) {
    case MWCC_MODE_JOINT: return mwcc::PropagationMode::joint;
    case MWCC_MODE_LITERAL: return mwcc::PropagationMode::literal;
  }
  mwcc::raise(mwcc::ErrorCode::invalid_argument, "unknown mode " + std::to_string(static_cast<int>(mode)));
}

mwcc_policy* wrap(const mwcc::Problem& p, mwcc::Policy pi) {
  mwcc::validate_policy(p, pi);
  return new mwcc_policy{std::move(pi)};
}

}  // namespace

extern "C" {

const char* mwcc_version(void) { return "0.3.0"; }

const char* mwcc_status_name(mwcc_status status) {
  switch (status) {
    case MWCC_OK: return "ok";
    case MWCC_E_INVALID_ARGUMENT: return mwcc::error_code_name(mwcc::ErrorCode::invalid_argument);
    case MWCC_E_VALIDATION: return mwcc::error_code_name(mwcc::ErrorCode::validation);
    case MWCC_E_PARSE: return mwcc::error_code_name(mwcc::ErrorCode::parse);
    case MWCC_E_BUDGET: return mwcc::error_code_name(mwcc::ErrorCode::budget);
    case MWCC_E_IO: return mwcc::error_code_name(mwcc::ErrorCode::io);
    case MWCC_E_UNSUPPORTED: return mwcc::error_code_name(mwcc::ErrorCode::unsupported);
    case MWCC_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* mwcc_last_error(void) { return last_error.c_str(); }

void mwcc_string_free(char* str) { std::free(str); }

mwcc_status mwcc_problem_load(const char* path, mwcc_problem** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new mwcc_problem{mwcc::load_problem(path)};
  });
}

mwcc_status mwcc_problem_parse(const char* json_text, mwcc_problem** out) {
  return guarded([&] {
    need(json_text, "json_text");
    need(out, "out");
    *out = new mwcc_problem{mwcc::parse_problem(json_text)};
  });
}

mwcc_status mwcc_problem_discretize(const mwcc_continuous_spec* spec, size_t n_state_cells, size_t n_actions,
                                    mwcc_problem** out) {
  return guarded([&] {
    need(spec, "spec");
    need(out, "out");
    *out = new mwcc_problem{mwcc::discretize(from_c(*spec), mwcc::GridSpec{n_state_cells, n_actions})};
  });
}

mwcc_status mwcc_problem_with_risk_bound(const mwcc_problem* problem, double risk_bound, mwcc_problem** out) {
  return guarded([&] {
    need(problem, "problem");
    need(out, "out");
    *out = new mwcc_problem{problem->value.with_risk_bound(risk_bound)};
  });
}

void mwcc_problem_free(mwcc_problem* problem) { delete problem; }

mwcc_status mwcc_problem_to_json(const mwcc_problem* problem, char** out) {
  return guarded([&] {
    need(problem, "problem");
    need(out, "out");
    *out = dup_string(mwcc::problem_to_json(problem->value));
  });
}

mwcc_status mwcc_problem_num_states(const mwcc_problem* problem, size_t* out) {
  return guarded([&] {
    need(problem, "problem");
    need(out, "out");
    *out = problem->value.num_states();
  });
}

mwcc_status mwcc_problem_num_actions(const mwcc_problem* problem, size_t state, size_t* out) {
  return guarded([&] {
    need(problem, "problem");
    need(out, "out");
    if (state >= problem->value.num_states())
      mwcc::raise(mwcc::ErrorCode::invalid_argument, "state index " + std::to_string(state) + " out of range");
    *out = problem->value.num_actions(state);
  });
}

mwcc_status mwcc_problem_horizon(const mwcc_problem* problem, int* out) {
  return guarded([&] {
    need(problem, "problem");
    need(out, "out");
    *out = problem->value.horizon();
  });
}

mwcc_status mwcc_problem_risk_bound(const mwcc_problem* problem, double* out) {
  return guarded([&] {
    need(problem, "problem");
    need(out, "out");
    *out = problem->value.risk_bound();
  });
}

mwcc_status mwcc_problem_initial_state(const mwcc_problem* problem, size_t* out) {
  return guarded([&] {
    need(problem, "problem");
    need(out, "out");
    *out = problem->value.initial_state();
  });
}

mwcc_status mwcc_problem_state_name(const mwcc_problem* problem, size_t state, const char** out) {
  return guarded([&] {
    need(problem, "problem");
    need(out, "out");
    if (state >= problem->value.num_states())
      mwcc::raise(mwcc::ErrorCode::invalid_argument, "state index " + std::to_string(state) + " out of range");
    *out = problem->value.state_name(state).c_str();
  });
}

mwcc_status mwcc_problem_is_discretized(const mwcc_problem* problem, int* out) {
  return guarded([&] {
    need(problem, "problem");
    need(out, "out");
    *out = problem->value.grid() != nullptr ? 1 : 0;
  });
}

mwcc_status mwcc_problem_transition_row(const mwcc_problem* problem, size_t state, size_t action, double* safe,
                                        size_t capacity, double* fail) {
  return guarded([&] {
    need(problem, "problem");
    need(safe, "safe");
    need(fail, "fail");
    const mwcc::TransitionRow& row = mwcc::transition_row(problem->value, state, action);
    if (capacity < row.safe.size())
      mwcc::raise(mwcc::ErrorCode::invalid_argument, "capacity " + std::to_string(capacity) + " below state count " +
                                                         std::to_string(row.safe.size()));
    std::copy(row.safe.begin(), row.safe.end(), safe);
    *fail = row.fail;
  });
}

mwcc_status mwcc_casestudy_spec(const char* variant, mwcc_continuous_spec* out) {
  return guarded([&] {
    need(variant, "variant");
    need(out, "out");
    auto spec = mwcc::casestudy_spec(variant);
    if (!spec) mwcc::raise(mwcc::ErrorCode::invalid_argument, std::string("unknown case-study variant '") + variant + "'");
    *out = to_c(*spec);
  });
}

mwcc_status mwcc_policy_create(const mwcc_problem* problem, const size_t* actions, size_t length, mwcc_policy** out) {
  return guarded([&] {
    need(problem, "problem");
    need(out, "out");
    const auto& p = problem->value;
    const std::size_t n = p.num_states();
    const std::size_t expected = static_cast<std::size_t>(p.horizon()) * n;
    if (length != expected)
      mwcc::raise(mwcc::ErrorCode::invalid_argument, "policy needs " + std::to_string(expected) + " actions, got " +
                                                         std::to_string(length));
    if (length > 0) need(actions, "actions");
    mwcc::Policy pi;
    pi.rules.resize(static_cast<std::size_t>(p.horizon()));
    for (std::size_t k = 0; k < pi.rules.size(); ++k) pi.rules[k].assign(actions + k * n, actions + (k + 1) * n);
    *out = wrap(p, std::move(pi));
  });
}

mwcc_status mwcc_policy_load(const mwcc_problem* problem, const char* path, mwcc_policy** out) {
  return guarded([&] {
    need(problem, "problem");
    need(path, "path");
    need(out, "out");
    *out = wrap(problem->value, mwcc::load_policy(problem->value, path));
  });
}

mwcc_status mwcc_policy_parse(const mwcc_problem* problem, const char* json_text, mwcc_policy** out) {
  return guarded([&] {
    need(problem, "problem");
    need(json_text, "json_text");
    need(out, "out");
    *out = wrap(problem->value, mwcc::parse_policy(problem->value, json_text));
  });
}

void mwcc_policy_free(mwcc_policy* policy) { delete policy; }

mwcc_status mwcc_policy_action(const mwcc_policy* policy, size_t stage, size_t state, size_t* out) {
  return guarded([&] {
    need(policy, "policy");
    need(out, "out");
    const auto& rules = policy->value.rules;
    if (stage >= rules.size() || state >= rules[stage].size())
      mwcc::raise(mwcc::ErrorCode::invalid_argument,
                  "(stage " + std::to_string(stage) + ", state " + std::to_string(state) + ") out of range");
    *out = rules[stage][state];
  });
}

mwcc_status mwcc_policy_to_json(const mwcc_problem* problem, const mwcc_policy* policy, char** out) {
  return guarded([&] {
    need(problem, "problem");
    need(policy, "policy");
    need(out, "out");
    *out = dup_string(mwcc::policy_to_json(problem->value, policy->value));
  });
}

mwcc_status mwcc_policy_to_string(const mwcc_problem* problem, const mwcc_policy* policy, char** out) {
  return guarded([&] {
    need(problem, "problem");
    need(policy, "policy");
    need(out, "out");
    *out = dup_string(mwcc::policy_string(problem->value, policy->value));
  });
}

mwcc_status mwcc_policy_id(const mwcc_policy* policy, char** out) {
  return guarded([&] {
    need(policy, "policy");
    need(out, "out");
    *out = dup_string(mwcc::policy_id(policy->value));
  });
}

mwcc_status mwcc_mwps_backward(const mwcc_problem* problem, const mwcc_policy* policy, double* out) {
  return guarded([&] {
    need(problem, "problem");
    need(policy, "policy");
    need(out, "out");
    *out = mwcc::mwps_backward(problem->value, policy->value).at_initial(problem->value);
  });
}

mwcc_status mwcc_mwps_forward(const mwcc_problem* problem, const mwcc_policy* policy, double* out) {
  return guarded([&] {
    need(problem, "problem");
    need(policy, "policy");
    need(out, "out");
    *out = mwcc::mwps_forward(problem->value, policy->value);
  });
}

mwcc_status mwcc_monte_carlo_mwps(const mwcc_problem* problem, const mwcc_policy* policy, uint64_t rollouts,
                                  uint64_t seed, mwcc_estimate* out) {
  return guarded([&] {
    need(problem, "problem");
    need(policy, "policy");
    need(out, "out");
    const auto e = mwcc::monte_carlo_mwps(problem->value, policy->value, rollouts, seed);
    *out = mwcc_estimate{e.mean, e.std_error, e.samples};
  });
}

mwcc_status mwcc_safety_table_csv(const mwcc_problem* problem, const mwcc_policy* policy, char** out) {
  return guarded([&] {
    need(problem, "problem");
    need(policy, "policy");
    need(out, "out");
    *out = dup_string(mwcc::safety_table_csv(problem->value, mwcc::mwps_backward(problem->value, policy->value)));
  });
}

mwcc_status mwcc_safety_table_json(const mwcc_problem* problem, const mwcc_policy* policy, char** out) {
  return guarded([&] {
    need(problem, "problem");
    need(policy, "policy");
    need(out, "out");
    *out = dup_string(mwcc::safety_table_json(problem->value, mwcc::mwps_backward(problem->value, policy->value)));
  });
}

mwcc_status mwcc_solve_penalty(const mwcc_problem* problem, const mwcc_penalty* zeta, double* value,
                               mwcc_policy** out) {
  return guarded([&] {
    need(problem, "problem");
    need(zeta, "zeta");
    auto sol = mwcc::solve_penalty(problem->value, to_spec(*zeta));
    if (value != nullptr) *value = sol.value;
    if (out != nullptr) *out = new mwcc_policy{std::move(sol.policy)};
  });
}

mwcc_status mwcc_check_commutation(const mwcc_penalty* zeta, const double* values, const double* probabilities,
                                   size_t count, mwcc_commutation* out) {
  return guarded([&] {
    need(zeta, "zeta");
    need(out, "out");
    if (count > 0) {
      need(values, "values");
      need(probabilities, "probabilities");
    }
    std::vector<mwcc::ScenarioOutcome> scenario(count);
    for (std::size_t i = 0; i < count; ++i) scenario[i] = {values[i], probabilities[i]};
    const auto r = mwcc::check_commutation(to_spec(*zeta), scenario);
    *out = mwcc_commutation{r.lhs, r.rhs, r.commutes ? 1 : 0};
  });
}

mwcc_status mwcc_expected_cost(const mwcc_problem* problem, const mwcc_policy* policy, double* out) {
  return guarded([&] {
    need(problem, "problem");
    need(policy, "policy");
    need(out, "out");
    *out = mwcc::expected_cost(problem->value, policy->value);
  });
}

mwcc_status mwcc_sweep_lambda(const mwcc_problem* problem, const double* lambdas, size_t count, const double* delta,
                              char** csv_out, char** json_out) {
  return guarded([&] {
    need(problem, "problem");
    if (count > 0) need(lambdas, "lambdas");
    std::optional<double> d;
    if (delta != nullptr) d = *delta;
    const auto rows = mwcc::sweep_lambda(problem->value, std::vector<double>(lambdas, lambdas + count), d);
    std::string csv = mwcc::sweep_csv(rows);
    std::string json = mwcc::sweep_json(problem->value, rows);
    char* c = csv_out != nullptr ? dup_string(csv) : nullptr;
    if (json_out != nullptr) {
      try {
        *json_out = dup_string(json);
      } catch (...) {
        std::free(c);
        throw;
      }
    }
    if (csv_out != nullptr) *csv_out = c;
  });
}

double mwcc_terminal_penalty(double total_mass, double risk_bound) {
  return mwcc::terminal_penalty(total_mass, risk_bound);
}

mwcc_status mwcc_solve_augmented(const mwcc_problem* problem, mwcc_mode mode, const mwcc_budget* budget,
                                 mwcc_solve_report** out) {
  return guarded([&] {
    need(problem, "problem");
    need(out, "out");
    mwcc::BeliefBudget b;
    if (budget != nullptr) b = mwcc::BeliefBudget{budget->max_rules_per_node, budget->max_nodes};
    *out = new mwcc_solve_report{mwcc::solve_augmented(problem->value, to_mode(mode), b)};
  });
}

void mwcc_report_free(mwcc_solve_report* report) { delete report; }

mwcc_status mwcc_report_summary_get(const mwcc_solve_report* report, mwcc_report_summary* out) {
  return guarded([&] {
    need(report, "report");
    need(out, "out");
    const auto& r = report->value;
    std::size_t total = 0;
    for (auto c : r.node_counts) total += c;
    *out = mwcc_report_summary{r.value,
                               r.feasible ? 1 : 0,
                               r.mode == mwcc::PropagationMode::joint ? MWCC_MODE_JOINT : MWCC_MODE_LITERAL,
                               r.risk_bound,
                               r.expected_cost,
                               r.internal_mwps,
                               r.closed_loop_mwps,
                               r.closed_loop_mwps_backward,
                               r.mwps_discrepancy ? 1 : 0,
                               total,
                               r.solve_seconds};
  });
}

mwcc_status mwcc_report_node_counts(const mwcc_solve_report* report, size_t* counts, size_t capacity,
                                    size_t* length) {
  return guarded([&] {
    need(report, "report");
    need(length, "length");
    const auto& nc = report->value.node_counts;
    *length = nc.size();
    if (counts == nullptr) return;
    if (capacity < nc.size())
      mwcc::raise(mwcc::ErrorCode::invalid_argument, "capacity " + std::to_string(capacity) + " below stage count " +
                                                         std::to_string(nc.size()));
    std::copy(nc.begin(), nc.end(), counts);
  });
}

mwcc_status mwcc_report_to_json(const mwcc_problem* problem, const mwcc_solve_report* report, char** out) {
  return guarded([&] {
    need(problem, "problem");
    need(report, "report");
    need(out, "out");
    *out = dup_string(mwcc::solve_report_json(problem->value, report->value));
  });
}

mwcc_status mwcc_report_simulate(const mwcc_problem* problem, const mwcc_solve_report* report, uint64_t rollouts,
                                 uint64_t seed, mwcc_rollout_summary* out) {
  return guarded([&] {
    need(problem, "problem");
    need(report, "report");
    need(out, "out");
    if (!report->value.feasible)
      mwcc::raise(mwcc::ErrorCode::invalid_argument, "cannot simulate the policy of an infeasible solve");
    *out = to_c(mwcc::simulate_rollouts(problem->value, report->value.policy, rollouts, seed));
  });
}

mwcc_status mwcc_report_simulate_continuous(const mwcc_problem* problem, const mwcc_solve_report* report,
                                            uint64_t rollouts, uint64_t seed, mwcc_rollout_summary* out) {
  return guarded([&] {
    need(problem, "problem");
    need(report, "report");
    need(out, "out");
    if (!report->value.feasible)
      mwcc::raise(mwcc::ErrorCode::invalid_argument, "cannot simulate the policy of an infeasible solve");
    *out = to_c(mwcc::simulate_continuous(problem->value, report->value.policy, rollouts, seed));
  });
}

mwcc_status mwcc_count_policies(const mwcc_problem* problem, uint64_t budget, uint64_t* out) {
  return guarded([&] {
    need(problem, "problem");
    need(out, "out");
    *out = mwcc::count_policies(problem->value, budget);
  });
}

mwcc_status mwcc_exact_policy_stats(const mwcc_problem* problem, const mwcc_policy* policy, uint64_t budget,
                                    double* cost, double* mwps) {
  return guarded([&] {
    need(problem, "problem");
    need(policy, "policy");
    const auto s = mwcc::exact_policy_stats(problem->value, policy->value, budget);
    if (cost != nullptr) *cost = s.cost;
    if (mwps != nullptr) *mwps = s.mwps;
  });
}

mwcc_status mwcc_oracle_run(const mwcc_problem* problem, uint64_t policy_budget, mwcc_oracle** out) {
  return guarded([&] {
    need(problem, "problem");
    need(out, "out");
    *out = new mwcc_oracle{problem->value, mwcc::brute_force_constrained(problem->value, policy_budget)};
  });
}

void mwcc_oracle_free(mwcc_oracle* oracle) { delete oracle; }

mwcc_status mwcc_oracle_row_count(const mwcc_oracle* oracle, uint64_t* out) {
  return guarded([&] {
    need(oracle, "oracle");
    need(out, "out");
    *out = oracle->value.rows.size();
  });
}

mwcc_status mwcc_oracle_constrained(const mwcc_oracle* oracle, int* feasible, double* cost, double* mwps,
                                    mwcc_policy** policy) {
  return guarded([&] {
    need(oracle, "oracle");
    need(feasible, "feasible");
    const auto& best = oracle->value.constrained_best;
    *feasible = best ? 1 : 0;
    if (!best) return;
    const auto& row = oracle->value.rows[*best];
    if (cost != nullptr) *cost = row.cost;
    if (mwps != nullptr) *mwps = row.mwps;
    if (policy != nullptr) *policy = new mwcc_policy{mwcc::policy_at(oracle->problem, row.index)};
  });
}

mwcc_status mwcc_oracle_penalized(const mwcc_oracle* oracle, const mwcc_penalty* zeta, double* value,
                                  mwcc_policy** policy) {
  return guarded([&] {
    need(oracle, "oracle");
    need(zeta, "zeta");
    const auto spec = to_spec(*zeta);
    const auto& row = oracle->value.penalized_best(spec);
    if (value != nullptr) *value = row.cost + mwcc::apply_penalty(spec, row.mwps);
    if (policy != nullptr) *policy = new mwcc_policy{mwcc::policy_at(oracle->problem, row.index)};
  });
}

mwcc_status mwcc_oracle_to_csv(const mwcc_oracle* oracle, char** out) {
  return guarded([&] {
    need(oracle, "oracle");
    need(out, "out");
    *out = dup_string(mwcc::oracle_csv(oracle->problem, oracle->value));
  });
}

mwcc_status mwcc_simulate_policy(const mwcc_problem* problem, const mwcc_policy* policy, uint64_t rollouts,
                                 uint64_t seed, mwcc_rollout_summary* out) {
  return guarded([&] {
    need(problem, "problem");
    need(policy, "policy");
    need(out, "out");
    mwcc::validate_policy(problem->value, policy->value);
    const mwcc::MarkovClosedLoop loop(policy->value);
    *out = to_c(mwcc::simulate_rollouts(problem->value, loop, rollouts, seed));
  });
}

}  // extern "C"
