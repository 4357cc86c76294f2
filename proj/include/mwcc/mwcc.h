/*
 * C interface of the mwcc library.
 *
 * Objects are opaque handles created by the library and released with the
 * matching *_free function (all of which accept NULL). Every fallible call
 * returns an mwcc_status; on failure mwcc_last_error() returns a message for
 * the calling thread, valid until that thread's next failing call. Strings
 * returned through char** out-parameters are owned by the caller and must be
 * released with mwcc_string_free.
 */
#ifndef MWCC_H
#define MWCC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(MWCC_BUILDING_LIBRARY)
#    define MWCC_API __declspec(dllexport)
#  else
#    define MWCC_API __declspec(dllimport)
#  endif
#else
#  define MWCC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mwcc_status {
  MWCC_OK = 0,
  MWCC_E_INVALID_ARGUMENT = 1,
  MWCC_E_VALIDATION = 2,
  MWCC_E_PARSE = 3,
  MWCC_E_BUDGET = 4,
  MWCC_E_IO = 5,
  MWCC_E_UNSUPPORTED = 6,
  MWCC_E_INTERNAL = 7
} mwcc_status;

typedef enum mwcc_mode { MWCC_MODE_JOINT = 0, MWCC_MODE_LITERAL = 1 } mwcc_mode;

typedef enum mwcc_penalty_kind { MWCC_PENALTY_AFFINE = 0, MWCC_PENALTY_EXACT = 1 } mwcc_penalty_kind;

typedef struct mwcc_problem mwcc_problem;
typedef struct mwcc_policy mwcc_policy;
typedef struct mwcc_solve_report mwcc_solve_report;
typedef struct mwcc_oracle mwcc_oracle;

/* s+ = drift + state_gain*s + action_gain*a + w, w ~ N(0, noise_std^2). */
typedef struct mwcc_continuous_spec {
  double drift;
  double state_gain;
  double action_gain;
  double noise_std;
  double action_min;
  double action_max;
  double safe_lo;
  double safe_hi;
  double stage_state_weight;
  double stage_action_weight;
  double terminal_state_weight;
  int horizon;
  double risk_bound;
  double initial_value;
} mwcc_continuous_spec;

/* zeta(x) = slope*x + offset (affine) or 0 / +inf around 1 - risk_bound (exact). */
typedef struct mwcc_penalty {
  mwcc_penalty_kind kind;
  double slope;
  double offset;
  double risk_bound;
} mwcc_penalty;

typedef struct mwcc_budget {
  uint64_t max_rules_per_node;
  uint64_t max_nodes;
} mwcc_budget;

typedef struct mwcc_estimate {
  double mean;
  double std_error;
  uint64_t samples;
} mwcc_estimate;

typedef struct mwcc_rollout_summary {
  uint64_t rollouts;
  double mean_cost;
  double cost_std_error;
  double safety_fraction;
  double safety_std_error;
} mwcc_rollout_summary;

typedef struct mwcc_commutation {
  double lhs;
  double rhs;
  int commutes;
} mwcc_commutation;

typedef struct mwcc_report_summary {
  double value; /* +inf when infeasible */
  int feasible;
  mwcc_mode mode;
  double risk_bound;
  double expected_cost;
  double internal_mwps;
  double closed_loop_mwps;
  double closed_loop_mwps_backward;
  int mwps_discrepancy;
  size_t total_nodes;
  double solve_seconds;
} mwcc_report_summary;

/* ---- library ---------------------------------------------------------- */
MWCC_API const char* mwcc_version(void);
MWCC_API const char* mwcc_status_name(mwcc_status status);
MWCC_API const char* mwcc_last_error(void);
MWCC_API void mwcc_string_free(char* str);

/* ---- problems --------------------------------------------------------- */
MWCC_API mwcc_status mwcc_problem_load(const char* path, mwcc_problem** out);
MWCC_API mwcc_status mwcc_problem_parse(const char* json_text, mwcc_problem** out);
MWCC_API mwcc_status mwcc_problem_discretize(const mwcc_continuous_spec* spec, size_t n_state_cells,
                                             size_t n_actions, mwcc_problem** out);
MWCC_API mwcc_status mwcc_problem_with_risk_bound(const mwcc_problem* problem, double risk_bound,
                                                  mwcc_problem** out);
MWCC_API void mwcc_problem_free(mwcc_problem* problem);
MWCC_API mwcc_status mwcc_problem_to_json(const mwcc_problem* problem, char** out);
MWCC_API mwcc_status mwcc_problem_num_states(const mwcc_problem* problem, size_t* out);
MWCC_API mwcc_status mwcc_problem_num_actions(const mwcc_problem* problem, size_t state, size_t* out);
MWCC_API mwcc_status mwcc_problem_horizon(const mwcc_problem* problem, int* out);
MWCC_API mwcc_status mwcc_problem_risk_bound(const mwcc_problem* problem, double* out);
MWCC_API mwcc_status mwcc_problem_initial_state(const mwcc_problem* problem, size_t* out);
/* The returned name lives as long as the problem. */
MWCC_API mwcc_status mwcc_problem_state_name(const mwcc_problem* problem, size_t state, const char** out);
MWCC_API mwcc_status mwcc_problem_is_discretized(const mwcc_problem* problem, int* out);
/* Copies the safe-state probabilities into safe[0..capacity) (capacity must be
 * at least the state count) and the residual fail mass into *fail. */
MWCC_API mwcc_status mwcc_problem_transition_row(const mwcc_problem* problem, size_t state, size_t action,
                                                 double* safe, size_t capacity, double* fail);
MWCC_API mwcc_status mwcc_casestudy_spec(const char* variant, mwcc_continuous_spec* out);

/* ---- Markov policies -------------------------------------------------- */
/* actions has horizon * num_states entries, stage-major. */
MWCC_API mwcc_status mwcc_policy_create(const mwcc_problem* problem, const size_t* actions, size_t length,
                                        mwcc_policy** out);
MWCC_API mwcc_status mwcc_policy_load(const mwcc_problem* problem, const char* path, mwcc_policy** out);
MWCC_API mwcc_status mwcc_policy_parse(const mwcc_problem* problem, const char* json_text, mwcc_policy** out);
MWCC_API void mwcc_policy_free(mwcc_policy* policy);
MWCC_API mwcc_status mwcc_policy_action(const mwcc_policy* policy, size_t stage, size_t state, size_t* out);
MWCC_API mwcc_status mwcc_policy_to_json(const mwcc_problem* problem, const mwcc_policy* policy, char** out);
MWCC_API mwcc_status mwcc_policy_to_string(const mwcc_problem* problem, const mwcc_policy* policy, char** out);
MWCC_API mwcc_status mwcc_policy_id(const mwcc_policy* policy, char** out);

/* ---- safety probability ---------------------------------------------- */
MWCC_API mwcc_status mwcc_mwps_backward(const mwcc_problem* problem, const mwcc_policy* policy, double* out);
MWCC_API mwcc_status mwcc_mwps_forward(const mwcc_problem* problem, const mwcc_policy* policy, double* out);
MWCC_API mwcc_status mwcc_monte_carlo_mwps(const mwcc_problem* problem, const mwcc_policy* policy, uint64_t rollouts,
                                           uint64_t seed, mwcc_estimate* out);
MWCC_API mwcc_status mwcc_safety_table_csv(const mwcc_problem* problem, const mwcc_policy* policy, char** out);
MWCC_API mwcc_status mwcc_safety_table_json(const mwcc_problem* problem, const mwcc_policy* policy, char** out);

/* ---- penalized dynamic programming ----------------------------------- */
MWCC_API mwcc_status mwcc_solve_penalty(const mwcc_problem* problem, const mwcc_penalty* zeta, double* value,
                                        mwcc_policy** out);
MWCC_API mwcc_status mwcc_check_commutation(const mwcc_penalty* zeta, const double* values,
                                            const double* probabilities, size_t count, mwcc_commutation* out);
MWCC_API mwcc_status mwcc_expected_cost(const mwcc_problem* problem, const mwcc_policy* policy, double* out);
/* delta == NULL selects offset -lambda per row. Either output may be NULL. */
MWCC_API mwcc_status mwcc_sweep_lambda(const mwcc_problem* problem, const double* lambdas, size_t count,
                                       const double* delta, char** csv_out, char** json_out);

/* ---- augmented dynamic programming ----------------------------------- */
MWCC_API double mwcc_terminal_penalty(double total_mass, double risk_bound);
/* budget == NULL selects the defaults (10^6 rules per node, 2*10^6 nodes).
 * An infeasible problem is not an error: check the report's verdict. */
MWCC_API mwcc_status mwcc_solve_augmented(const mwcc_problem* problem, mwcc_mode mode, const mwcc_budget* budget,
                                          mwcc_solve_report** out);
MWCC_API void mwcc_report_free(mwcc_solve_report* report);
MWCC_API mwcc_status mwcc_report_summary_get(const mwcc_solve_report* report, mwcc_report_summary* out);
MWCC_API mwcc_status mwcc_report_node_counts(const mwcc_solve_report* report, size_t* counts, size_t capacity,
                                             size_t* length);
MWCC_API mwcc_status mwcc_report_to_json(const mwcc_problem* problem, const mwcc_solve_report* report, char** out);
MWCC_API mwcc_status mwcc_report_simulate(const mwcc_problem* problem, const mwcc_solve_report* report,
                                          uint64_t rollouts, uint64_t seed, mwcc_rollout_summary* out);
MWCC_API mwcc_status mwcc_report_simulate_continuous(const mwcc_problem* problem, const mwcc_solve_report* report,
                                                     uint64_t rollouts, uint64_t seed, mwcc_rollout_summary* out);

/* ---- oracle and simulation ------------------------------------------- */
MWCC_API mwcc_status mwcc_count_policies(const mwcc_problem* problem, uint64_t budget, uint64_t* out);
MWCC_API mwcc_status mwcc_exact_policy_stats(const mwcc_problem* problem, const mwcc_policy* policy, uint64_t budget,
                                             double* cost, double* mwps);
MWCC_API mwcc_status mwcc_oracle_run(const mwcc_problem* problem, uint64_t policy_budget, mwcc_oracle** out);
MWCC_API void mwcc_oracle_free(mwcc_oracle* oracle);
MWCC_API mwcc_status mwcc_oracle_row_count(const mwcc_oracle* oracle, uint64_t* out);
/* *feasible = 0 leaves *cost, *mwps and *policy untouched. */
MWCC_API mwcc_status mwcc_oracle_constrained(const mwcc_oracle* oracle, int* feasible, double* cost, double* mwps,
                                             mwcc_policy** policy);
MWCC_API mwcc_status mwcc_oracle_penalized(const mwcc_oracle* oracle, const mwcc_penalty* zeta, double* value,
                                           mwcc_policy** policy);
MWCC_API mwcc_status mwcc_oracle_to_csv(const mwcc_oracle* oracle, char** out);
MWCC_API mwcc_status mwcc_simulate_policy(const mwcc_problem* problem, const mwcc_policy* policy, uint64_t rollouts,
                                          uint64_t seed, mwcc_rollout_summary* out);

#ifdef __cplusplus
}
#endif

#endif /* MWCC_H */
