#pragma once

// Exact dynamic programming on the augmented state (s_k, F_k), where F_k is
// the functional state of safe-so-far mass. From a fixed initial state the
// reachable F_k form a tree whose branches are indexed by the decision rules
// applied so far; the recursion runs backward over that tree with the exact
// 0/inf penalty on the terminal safe mass.

#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>
#include <tuple>
#include <vector>

#include "mwcc/closed_loop.hpp"
#include "mwcc/model.hpp"
#include "mwcc/safety.hpp"

namespace mwcc {

/// How a node's children are generated.
///  joint   - one child per decision rule over the node's support (exact).
///  literal - one child per single action shared by every supported state.
enum class PropagationMode { joint, literal };

const char* mode_name(PropagationMode mode) noexcept;
std::optional<PropagationMode> parse_mode(std::string_view text) noexcept;

/// Distinguished infeasible value; propagates through sums and minima.
inline constexpr double kInfeasible = std::numeric_limits<double>::infinity();

/// 0 when total_mass >= 1 - risk_bound (with absolute slack 1e-12), else
/// kInfeasible.
double terminal_penalty(double total_mass, double risk_bound);

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

struct BeliefBudget {
  std::uint64_t max_rules_per_node = 1'000'000;
  std::uint64_t max_nodes = 2'000'000;
};

struct BeliefNode {
  std::size_t id = 0;
  int stage = 0;
  FunctionalState belief;
  // States reachable with positive kernel probability, ascending. A superset of
  // the numerically positive entries of `belief`.
  std::vector<StateIndex> support;
  std::size_t parent = kNoNode;
  // Rule that generated this node from its parent (kNoAction off the parent's
  // support).
  std::vector<ActionIndex> rule;
  // Child per candidate: rule index (joint) or action index (literal). Equal
  // siblings share one node.
  std::vector<std::size_t> children;
};

struct BeliefTree {
  PropagationMode mode = PropagationMode::joint;
  std::vector<BeliefNode> nodes;  // grouped by stage, parents before children
  std::vector<std::size_t> stage_begin;  // nodes of stage k: [stage_begin[k], stage_begin[k+1])

  const BeliefNode& root() const { return nodes.front(); }
  std::vector<std::size_t> node_counts() const;
};

/// Number of decision rules over a node's support, saturating at UINT64_MAX.
std::uint64_t rule_count(const Problem& p, const BeliefNode& node);

/// Decision rule with index `candidate`; the first support state is the most
/// significant digit.
std::vector<ActionIndex> decode_rule(const Problem& p, const BeliefNode& node, std::uint64_t candidate);

/// Builds the reachable tree stage by stage. Throws Error(budget) naming the
/// node and the budget it needs; Error(unsupported) for literal mode when
/// states admit different numbers of actions.
BeliefTree enumerate_reachable_beliefs(const Problem& p, PropagationMode mode, const BeliefBudget& budget = {});

/// Feedback on (belief node, state). Stage-N nodes carry no actions.
class AugmentedPolicy final : public ClosedLoopPolicy {
 public:
  BeliefTree tree;
  std::vector<std::vector<ActionIndex>> actions;       // [node][state]
  std::vector<std::vector<std::size_t>> successors;    // [node][state]
  std::vector<std::size_t> fail_successor;             // [node]

  std::size_t root() const override { return 0; }
  ActionIndex action(std::size_t node, StateIndex s) const override { return actions[node][s]; }
  std::size_t next(std::size_t node, StateIndex s) const override { return successors[node][s]; }
  std::size_t fail_next(std::size_t node) const override { return fail_successor[node]; }
};

struct AugmentedEvaluation {
  double expected_cost = 0.0;
  double closed_loop_mwps = 0.0;           // forward sweep over (node, state) mass
  double closed_loop_mwps_backward = 0.0;  // safety recursion on the (node, state) chain
  // Terminal safe mass of each leaf the controller ends in, weighted by the
  // probability (safe or failed) of ending there.
  double internal_mwps = 0.0;
  double min_leaf_mass = 1.0;
};

/// Exact closed-loop cost and MWPS of an augmented policy. Throws
/// Error(invalid_argument) if a (node, state) pair with positive mass has no
/// action.
AugmentedEvaluation evaluate_augmented_policy(const Problem& p, const AugmentedPolicy& ap);

/// (stage, node, state, action) for every pair the policy visits with
/// positive probability.
std::vector<std::tuple<int, std::size_t, StateIndex, ActionIndex>> visited_entries(const Problem& p,
                                                                                    const AugmentedPolicy& ap);

struct SolveReport {
  PropagationMode mode = PropagationMode::joint;
  double value = kInfeasible;  // J_0 at (s0, F_0)
  bool feasible = false;
  double risk_bound = 0.0;
  AugmentedPolicy policy;
  // node_values[node][s] = J_k, node_fail_values[node] = continuation of the
  // fail branch. Entries off a joint node's support are NaN.
  std::vector<std::vector<double>> node_values;
  std::vector<double> node_fail_values;
  double internal_mwps = 0.0;
  double closed_loop_mwps = 0.0;
  double closed_loop_mwps_backward = 0.0;
  double expected_cost = 0.0;
  bool mwps_discrepancy = false;  // |internal - closed loop| > 1e-9
  std::vector<std::size_t> node_counts;
  std::size_t num_states = 0;
  double solve_seconds = 0.0;
};

SolveReport solve_augmented(const Problem& p, PropagationMode mode, const BeliefBudget& budget = {});

}  // namespace mwcc
