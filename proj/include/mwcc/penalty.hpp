#pragma once

// State-space dynamic programming for the penalized objective
//   E[sum of costs] + zeta(MWPS)
// which is exact only when zeta commutes with the one-step expectation, i.e.
// when zeta is affine.

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mwcc/model.hpp"

namespace mwcc {

/// zeta(x) = slope * x + offset.
struct AffinePenalty {
  double slope = 0.0;
  double offset = 0.0;
};

/// zeta(x) = 0 if x >= 1 - risk_bound, +inf otherwise.
struct ExactPenalty {
  double risk_bound = 0.0;
};

using PenaltySpec = std::variant<AffinePenalty, ExactPenalty>;

double apply_penalty(const PenaltySpec& zeta, double x);

struct ValueTable {
  // values[k][s], k = 0..N, over safe states.
  std::vector<std::vector<double>> values;
  // Continuation of a trajectory absorbed in the fail state (zeta(0)).
  double fail_value = 0.0;
};

struct PenaltySolution {
  Policy policy;
  ValueTable table;
  double value = 0.0;  // table at (0, s0)
};

/// Backward recursion with terminal value l_N(s) + slope + offset on safe
/// states and offset on the fail branch. Ties go to the lowest action index.
PenaltySolution solve_affine_penalty(const Problem& p, double slope, double offset);

/// Dispatches on the penalty kind; an exact penalty is refused with
/// Error(unsupported) since it does not commute with the expectation.
PenaltySolution solve_penalty(const Problem& p, const PenaltySpec& zeta);

struct ScenarioOutcome {
  double value = 0.0;
  double probability = 0.0;
};

struct CommutationReport {
  double lhs = 0.0;  // zeta(E[V])
  double rhs = 0.0;  // E[zeta(V)]
  bool commutes = false;
};

/// Compares zeta(E[V]) with E[zeta(V)] on a finite scenario. Infinite sides
/// compare equal only to each other.
CommutationReport check_commutation(const PenaltySpec& zeta, std::span<const ScenarioOutcome> scenario);

/// Expected accumulated cost of a Markov policy (zero cost after failure).
double expected_cost(const Problem& p, const Policy& pi);

struct SweepRow {
  double lambda = 0.0;
  double delta = 0.0;
  double objective = 0.0;  // penalized optimum
  double cost = 0.0;       // true expected cost of the greedy policy
  double mwps = 0.0;
  Policy policy;
};

/// Solves the affine problem for every price in `lambdas` (offset defaults to
/// -lambda) and evaluates each greedy policy. Rows come back sorted by lambda.
std::vector<SweepRow> sweep_lambda(const Problem& p, std::vector<double> lambdas,
                                   std::optional<double> delta = std::nullopt);

/// Short stable identifier of a policy (64-bit FNV-1a over its actions).
std::string policy_id(const Policy& pi);

}  // namespace mwcc
