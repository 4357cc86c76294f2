#pragma once

// Problem data model: a finite-horizon tabular MDP over a set of safe states
// plus one absorbing, zero-cost fail state.

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mwcc {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;

inline constexpr ActionIndex kNoAction = std::numeric_limits<ActionIndex>::max();

// Slack allowed on probability sums and on feasibility comparisons.
inline constexpr double kProbabilityTolerance = 1e-12;

/// Outgoing distribution of one (state, action) pair. Mass missing from the
/// safe entries goes to the fail state.
struct TransitionRow {
  std::vector<double> safe;
  double fail = 0.0;
  // Half-open index range holding every nonzero of `safe`.
  std::size_t first = 0;
  std::size_t last = 0;
};

/// One-dimensional Gaussian-affine system
///   s+ = drift + state_gain * s + action_gain * a + w,  w ~ N(0, noise_std^2)
/// with quadratic costs q_s s^2 + q_a a^2 per stage and q_N s^2 at the end.
struct ContinuousSpec {
  double drift = 0.0;
  double state_gain = 1.0;
  double action_gain = 1.0;
  double noise_std = 0.01;
  double action_min = -0.1;
  double action_max = 0.1;
  double safe_lo = -1.0;
  double safe_hi = 1.0;
  double stage_state_weight = 1.0;
  double stage_action_weight = 1.0;
  double terminal_state_weight = 1.0;
  int horizon = 2;
  double risk_bound = 0.1;
  double initial_value = 0.0;
};

struct GridSpec {
  std::size_t n_state_cells = 401;
  std::size_t n_actions = 21;
};

/// Geometry kept alongside a discretized problem so that closed-loop
/// simulation can run on the continuous system.
struct GridModel {
  ContinuousSpec spec;
  GridSpec grid;
  double cell_width = 0.0;
  std::vector<double> cell_centers;
  std::vector<double> action_values;

  bool inside(double x) const { return x >= spec.safe_lo && x <= spec.safe_hi; }
  // Cell containing x; x must lie in the safe interval.
  StateIndex locate(double x) const;
};

/// Plain description consumed by build_problem. kernel[s][a] lists the
/// probabilities of moving to each safe state.
struct ProblemData {
  std::vector<std::string> states;
  std::string fail = "fail";
  std::vector<std::vector<std::string>> actions;
  std::vector<std::vector<std::vector<double>>> kernel;
  std::vector<std::vector<double>> stage_cost;
  std::vector<double> terminal_cost;
  int horizon = 1;
  double risk_bound = 0.0;
  StateIndex initial_state = 0;
};

/// Validated, immutable problem. Copies share the underlying tables.
class Problem {
 public:
  std::size_t num_states() const { return tables_->states.size(); }
  const std::string& state_name(StateIndex s) const { return tables_->states.at(s); }
  const std::string& fail_name() const { return tables_->fail; }
  std::size_t num_actions(StateIndex s) const { return tables_->actions.at(s).size(); }
  const std::string& action_name(StateIndex s, ActionIndex a) const {
    return tables_->actions.at(s).at(a);
  }
  std::size_t max_actions() const { return tables_->max_actions; }
  // True when every state admits the same number of actions.
  bool uniform_actions() const { return tables_->uniform_actions; }

  const TransitionRow& row(StateIndex s, ActionIndex a) const { return tables_->kernel[s][a]; }
  double stage_cost(StateIndex s, ActionIndex a) const { return tables_->stage_cost[s][a]; }
  double terminal_cost(StateIndex s) const { return tables_->terminal_cost[s]; }

  int horizon() const { return horizon_; }
  double risk_bound() const { return risk_bound_; }
  StateIndex initial_state() const { return initial_state_; }

  const GridModel* grid() const { return tables_->grid ? &*tables_->grid : nullptr; }

  Problem with_risk_bound(double risk_bound) const;

  ProblemData to_data() const;

 private:
  struct Tables {
    std::vector<std::string> states;
    std::string fail;
    std::vector<std::vector<std::string>> actions;
    std::vector<std::vector<TransitionRow>> kernel;
    std::vector<std::vector<double>> stage_cost;
    std::vector<double> terminal_cost;
    std::size_t max_actions = 0;
    bool uniform_actions = true;
    std::optional<GridModel> grid;
  };

  Problem() = default;

  std::shared_ptr<const Tables> tables_;
  int horizon_ = 1;
  double risk_bound_ = 0.0;
  StateIndex initial_state_ = 0;

  friend Problem build_problem(ProblemData data);
  friend Problem discretize(const ContinuousSpec& cspec, const GridSpec& grid);
};

/// Validates `data` and freezes it. Throws Error(validation) naming the
/// offending row or field.
Problem build_problem(ProblemData data);

/// Grid discretization of a ContinuousSpec: equal cells represented by their
/// midpoints, equispaced actions, Gaussian cell masses from CDF differences.
Problem discretize(const ContinuousSpec& cspec, const GridSpec& grid);

void validate(const ContinuousSpec& cspec);
void validate(const GridSpec& grid);

/// Range-checked row lookup.
const TransitionRow& transition_row(const Problem& p, StateIndex s, ActionIndex a);

/// Deterministic Markov policy: rules[k][s] is the action taken in state s at
/// stage k.
struct Policy {
  std::vector<std::vector<ActionIndex>> rules;

  friend bool operator==(const Policy&, const Policy&) = default;
};

/// Throws Error(invalid_argument) unless the policy has one admissible rule
/// per stage.
void validate_policy(const Problem& p, const Policy& pi);

/// Policy applying action `a` everywhere; `a` must be admissible at every state.
Policy constant_policy(const Problem& p, ActionIndex a);

// Standard normal CDF and survival function.
double normal_cdf(double z);
double normal_sf(double z);

}  // namespace mwcc
