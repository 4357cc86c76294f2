#include "mwcc/augmented.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_map>

#include "mwcc/error.hpp"
#include "parallel.hpp"

namespace mwcc {

namespace {

constexpr double kDedupTolerance = 1e-12;
constexpr double kDiscrepancyTolerance = 1e-9;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// w * v with the convention that zero weight contributes nothing, so an
// infeasible value only spreads through branches that can actually occur.
inline double weighted(double w, double v) { return w > 0.0 ? w * v : 0.0; }

std::uint64_t hash_belief(const std::vector<StateIndex>& support, const std::vector<double>& mass) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  };
  for (StateIndex s : support) {
    mix(s);
    mix(static_cast<std::uint64_t>(std::llround(mass[s] / kDedupTolerance)));
  }
  return h;
}

bool same_belief(const BeliefNode& a, const std::vector<StateIndex>& support, const std::vector<double>& mass) {
  if (a.support != support) return false;
  for (StateIndex s : support)
    if (std::abs(a.belief.mass[s] - mass[s]) > kDedupTolerance) return false;
  return true;
}

std::string node_tag(const BeliefNode& node) {
  return "node " + std::to_string(node.id) + " (stage " + std::to_string(node.stage) + ")";
}

}  // namespace

const char* mode_name(PropagationMode mode) noexcept {
  return mode == PropagationMode::joint ? "joint" : "literal";
}

std::optional<PropagationMode> parse_mode(std::string_view text) noexcept {
  if (text == "joint") return PropagationMode::joint;
  if (text == "literal") return PropagationMode::literal;
  return std::nullopt;
}

double terminal_penalty(double total_mass, double risk_bound) {
  return total_mass >= 1.0 - risk_bound - kProbabilityTolerance ? 0.0 : kInfeasible;
}

std::vector<std::size_t> BeliefTree::node_counts() const {
  std::vector<std::size_t> counts;
  for (std::size_t k = 0; k + 1 < stage_begin.size(); ++k) counts.push_back(stage_begin[k + 1] - stage_begin[k]);
  return counts;
}

std::uint64_t rule_count(const Problem& p, const BeliefNode& node) {
  std::uint64_t count = 1;
  for (StateIndex s : node.support) {
    const std::uint64_t m = p.num_actions(s);
    if (count > std::numeric_limits<std::uint64_t>::max() / m) return std::numeric_limits<std::uint64_t>::max();
    count *= m;
  }
  return count;
}

std::vector<ActionIndex> decode_rule(const Problem& p, const BeliefNode& node, std::uint64_t candidate) {
  std::vector<ActionIndex> rule(p.num_states(), kNoAction);
  for (std::size_t i = node.support.size(); i-- > 0;) {
    const StateIndex s = node.support[i];
    const std::uint64_t m = p.num_actions(s);
    rule[s] = static_cast<ActionIndex>(candidate % m);
    candidate /= m;
  }
  return rule;
}

BeliefTree enumerate_reachable_beliefs(const Problem& p, PropagationMode mode, const BeliefBudget& budget) {
  if (mode == PropagationMode::literal && !p.uniform_actions())
    raise(ErrorCode::unsupported, "literal mode needs the same number of actions at every state");
  const std::size_t n = p.num_states();
  const int horizon = p.horizon();

  BeliefTree tree;
  tree.mode = mode;
  {
    BeliefNode root;
    root.belief = initial_functional_state(p);
    root.support = {p.initial_state()};
    tree.nodes.push_back(std::move(root));
  }
  tree.stage_begin = {0, 1};

  std::vector<char> in_support(n);
  for (int k = 0; k < horizon; ++k) {
    const std::size_t begin = tree.stage_begin[static_cast<std::size_t>(k)];
    const std::size_t end = tree.stage_begin[static_cast<std::size_t>(k) + 1];
    for (std::size_t id = begin; id < end; ++id) {
      const std::uint64_t candidates =
          mode == PropagationMode::joint ? rule_count(p, tree.nodes[id]) : p.max_actions();
      if (candidates > budget.max_rules_per_node)
        raise(ErrorCode::budget, node_tag(tree.nodes[id]) + " has " +
                                     (candidates == std::numeric_limits<std::uint64_t>::max()
                                          ? std::string("more than 2^64")
                                          : std::to_string(candidates)) +
                                     " decision rules over a support of " +
                                     std::to_string(tree.nodes[id].support.size()) +
                                     " states; the rule budget is " + std::to_string(budget.max_rules_per_node));

      std::unordered_map<std::uint64_t, std::vector<std::size_t>> siblings;
      std::vector<std::size_t> children(candidates);
      for (std::uint64_t c = 0; c < candidates; ++c) {
        const BeliefNode& parent = tree.nodes[id];
        std::vector<ActionIndex> rule;
        if (mode == PropagationMode::joint) {
          rule = decode_rule(p, parent, c);
        } else {
          rule.assign(n, kNoAction);
          for (StateIndex s : parent.support) rule[s] = static_cast<ActionIndex>(c);
        }
        BeliefNode child;
        child.stage = k + 1;
        child.belief.stage = k + 1;
        child.belief.mass.assign(n, 0.0);
        std::fill(in_support.begin(), in_support.end(), 0);
        for (StateIndex s : parent.support) {
          const TransitionRow& row = p.row(s, rule[s]);
          const double w = parent.belief.mass[s];
          for (std::size_t j = row.first; j < row.last; ++j) {
            if (row.safe[j] == 0.0) continue;
            in_support[j] = 1;
            child.belief.mass[j] += w * row.safe[j];
          }
        }
        for (StateIndex j = 0; j < n; ++j)
          if (in_support[j]) child.support.push_back(j);

        const std::uint64_t key = hash_belief(child.support, child.belief.mass);
        auto& bucket = siblings[key];
        auto match = std::find_if(bucket.begin(), bucket.end(), [&](std::size_t other) {
          return same_belief(tree.nodes[other], child.support, child.belief.mass);
        });
        if (match != bucket.end()) {
          children[c] = *match;
          continue;
        }
        if (tree.nodes.size() >= budget.max_nodes)
          raise(ErrorCode::budget, "belief tree exceeds the node budget of " + std::to_string(budget.max_nodes) +
                                       " while expanding " + node_tag(parent));
        child.id = tree.nodes.size();
        child.parent = id;
        child.rule = std::move(rule);
        children[c] = child.id;
        bucket.push_back(child.id);
        tree.nodes.push_back(std::move(child));
      }
      tree.nodes[id].children = std::move(children);
    }
    tree.stage_begin.push_back(tree.nodes.size());
  }
  return tree;
}

AugmentedEvaluation evaluate_augmented_policy(const Problem& p, const AugmentedPolicy& ap) {
  const std::size_t n = p.num_states();
  const auto& nodes = ap.tree.nodes;
  const int horizon = p.horizon();

  AugmentedEvaluation ev;
  std::vector<std::vector<double>> mass(nodes.size());
  std::vector<double> fail_mass(nodes.size(), 0.0);
  mass[0].assign(n, 0.0);
  mass[0][p.initial_state()] = 1.0;

  double leaf_weight = 0.0;
  ev.min_leaf_mass = 1.0;
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const BeliefNode& node = nodes[id];
    if (mass[id].empty() && fail_mass[id] == 0.0) continue;
    if (mass[id].empty()) mass[id].assign(n, 0.0);
    if (node.stage == horizon) {
      double safe = 0.0;
      for (StateIndex s = 0; s < n; ++s) {
        ev.expected_cost += mass[id][s] * p.terminal_cost(s);
        safe += mass[id][s];
      }
      ev.closed_loop_mwps += safe;
      const double q = safe + fail_mass[id];
      if (q > 0.0) {
        const double leaf_mass = node.belief.total();
        ev.internal_mwps += q * leaf_mass;
        leaf_weight += q;
        ev.min_leaf_mass = std::min(ev.min_leaf_mass, leaf_mass);
      }
      continue;
    }
    for (StateIndex s = 0; s < n; ++s) {
      const double m = mass[id][s];
      if (m == 0.0) continue;
      const ActionIndex a = ap.actions[id][s];
      if (a == kNoAction)
        raise(ErrorCode::invalid_argument, "augmented policy has no action at " + node_tag(node) + ", state '" +
                                               p.state_name(s) + "'");
      const std::size_t c = ap.successors[id][s];
      if (mass[c].empty()) mass[c].assign(n, 0.0);
      ev.expected_cost += m * p.stage_cost(s, a);
      const TransitionRow& row = p.row(s, a);
      for (std::size_t j = row.first; j < row.last; ++j) mass[c][j] += m * row.safe[j];
      fail_mass[c] += m * row.fail;
    }
    if (fail_mass[id] > 0.0) fail_mass[ap.fail_successor[id]] += fail_mass[id];
    mass[id].clear();
    mass[id].shrink_to_fit();
  }
  if (leaf_weight > 0.0) ev.internal_mwps /= leaf_weight;

  // Same quantity by the backward safety recursion over (node, state).
  std::vector<std::vector<double>> safety(nodes.size());
  for (std::size_t id = nodes.size(); id-- > 0;) {
    const BeliefNode& node = nodes[id];
    if (node.stage == horizon) {
      safety[id].assign(n, 1.0);
      continue;
    }
    safety[id].assign(n, kNaN);
    for (StateIndex s = 0; s < n; ++s) {
      const ActionIndex a = ap.actions[id][s];
      if (a == kNoAction) continue;
      const auto& next = safety[ap.successors[id][s]];
      const TransitionRow& row = p.row(s, a);
      double v = 0.0;
      for (std::size_t j = row.first; j < row.last; ++j)
        if (row.safe[j] != 0.0) v += row.safe[j] * next[j];
      safety[id][s] = v;
    }
  }
  ev.closed_loop_mwps_backward = safety[0][p.initial_state()];
  return ev;
}

std::vector<std::tuple<int, std::size_t, StateIndex, ActionIndex>> visited_entries(const Problem& p,
                                                                                    const AugmentedPolicy& ap) {
  const std::size_t n = p.num_states();
  const auto& nodes = ap.tree.nodes;
  std::vector<std::vector<char>> reached(nodes.size());
  reached[0].assign(n, 0);
  reached[0][p.initial_state()] = 1;
  std::vector<std::tuple<int, std::size_t, StateIndex, ActionIndex>> out;
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    if (reached[id].empty() || nodes[id].stage == p.horizon()) continue;
    for (StateIndex s = 0; s < n; ++s) {
      if (!reached[id][s]) continue;
      const ActionIndex a = ap.actions[id][s];
      out.emplace_back(nodes[id].stage, id, s, a);
      const std::size_t c = ap.successors[id][s];
      if (reached[c].empty()) reached[c].assign(n, 0);
      const TransitionRow& row = p.row(s, a);
      for (std::size_t j = row.first; j < row.last; ++j)
        if (row.safe[j] != 0.0) reached[c][j] = 1;
    }
  }
  return out;
}

SolveReport solve_augmented(const Problem& p, PropagationMode mode, const BeliefBudget& budget) {
  const auto started = std::chrono::steady_clock::now();
  const std::size_t n = p.num_states();
  const int horizon = p.horizon();
  const double eps = p.risk_bound();

  SolveReport report;
  report.mode = mode;
  report.risk_bound = eps;
  report.num_states = n;
  AugmentedPolicy& ap = report.policy;
  ap.tree = enumerate_reachable_beliefs(p, mode, budget);
  const auto& nodes = ap.tree.nodes;
  const std::size_t total = nodes.size();

  auto& J = report.node_values;
  auto& Jfail = report.node_fail_values;
  J.assign(total, {});
  Jfail.assign(total, kInfeasible);
  ap.actions.assign(total, {});
  ap.successors.assign(total, {});
  ap.fail_successor.assign(total, kNoNode);

  // Leaves: terminal cost plus the exact penalty on the remaining safe mass.
  for (std::size_t id = ap.tree.stage_begin[static_cast<std::size_t>(horizon)]; id < total; ++id) {
    const double pen = terminal_penalty(nodes[id].belief.total(), eps);
    J[id].assign(n, kNaN);
    if (mode == PropagationMode::literal) {
      for (StateIndex s = 0; s < n; ++s) J[id][s] = p.terminal_cost(s) + pen;
    } else {
      for (StateIndex s : nodes[id].support) J[id][s] = p.terminal_cost(s) + pen;
    }
    Jfail[id] = pen;
  }

  // Continuation of taking action a at s with successor node c.
  auto q_value = [&](StateIndex s, ActionIndex a, std::size_t c) {
    const TransitionRow& row = p.row(s, a);
    double v = p.stage_cost(s, a) + weighted(row.fail, Jfail[c]);
    for (std::size_t j = row.first; j < row.last; ++j) v += weighted(row.safe[j], J[c][j]);
    return v;
  };

  for (int k = horizon - 1; k >= 0; --k) {
    const std::size_t begin = ap.tree.stage_begin[static_cast<std::size_t>(k)];
    const std::size_t end = ap.tree.stage_begin[static_cast<std::size_t>(k) + 1];
    detail::parallel_for(end - begin, 1, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t id = begin + lo; id < begin + hi; ++id) {
        const BeliefNode& node = nodes[id];
        J[id].assign(n, kNaN);
        ap.actions[id].assign(n, kNoAction);
        ap.successors[id].assign(n, kNoNode);
        if (mode == PropagationMode::literal) {
          for (StateIndex s = 0; s < n; ++s) {
            double best = kNaN;
            ActionIndex best_a = 0;
            for (ActionIndex a = 0; a < p.num_actions(s); ++a) {
              const double v = q_value(s, a, node.children[a]);
              if (std::isnan(best) || v < best) {
                best = v;
                best_a = a;
              }
            }
            J[id][s] = best;
            ap.actions[id][s] = best_a;
            ap.successors[id][s] = node.children[best_a];
          }
          ActionIndex fail_a = 0;
          for (ActionIndex a = 1; a < node.children.size(); ++a)
            if (Jfail[node.children[a]] < Jfail[node.children[fail_a]]) fail_a = a;
          Jfail[id] = Jfail[node.children[fail_a]];
          ap.fail_successor[id] = node.children[fail_a];
        } else {
          // One rule for the whole node, chosen on the mass-weighted total
          // including trajectories that have already failed.
          const double failed_before = std::max(0.0, 1.0 - node.belief.total());
          double best = kNaN;
          std::uint64_t best_c = 0;
          for (std::uint64_t c = 0; c < node.children.size(); ++c) {
            const std::vector<ActionIndex> rule = decode_rule(p, node, c);
            const std::size_t child = node.children[c];
            double v = weighted(failed_before, Jfail[child]);
            for (StateIndex s : node.support) v += weighted(node.belief.mass[s], q_value(s, rule[s], child));
            if (std::isnan(best) || v < best) {
              best = v;
              best_c = c;
            }
          }
          const std::vector<ActionIndex> rule = decode_rule(p, node, best_c);
          const std::size_t child = node.children[best_c];
          for (StateIndex s : node.support) {
            J[id][s] = q_value(s, rule[s], child);
            ap.actions[id][s] = rule[s];
            ap.successors[id][s] = child;
          }
          Jfail[id] = Jfail[child];
          ap.fail_successor[id] = child;
        }
      }
    });
  }

  report.value = J[0][p.initial_state()];
  report.feasible = std::isfinite(report.value);
  const AugmentedEvaluation ev = evaluate_augmented_policy(p, ap);
  report.internal_mwps = ev.internal_mwps;
  report.closed_loop_mwps = ev.closed_loop_mwps;
  report.closed_loop_mwps_backward = ev.closed_loop_mwps_backward;
  report.expected_cost = ev.expected_cost;
  report.mwps_discrepancy = std::abs(ev.internal_mwps - ev.closed_loop_mwps) > kDiscrepancyTolerance;
  report.node_counts = ap.tree.node_counts();
  report.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace mwcc
