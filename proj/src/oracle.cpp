#include "mwcc/oracle.hpp"

#include <limits>

#include "mwcc/error.hpp"
#include "parallel.hpp"

namespace mwcc {

namespace {

// Depth-first expansion; the fail branch is absorbing and costs nothing, so it
// terminates immediately.
void expand(const Problem& p, const Policy& pi, int k, StateIndex s, double prob, PolicyStats& acc) {
  if (k == p.horizon()) {
    acc.cost += prob * p.terminal_cost(s);
    acc.mwps += prob;
    return;
  }
  const ActionIndex a = pi.rules[static_cast<std::size_t>(k)][s];
  acc.cost += prob * p.stage_cost(s, a);
  const TransitionRow& row = p.row(s, a);
  for (StateIndex j = 0; j < row.safe.size(); ++j)
    if (row.safe[j] > 0.0) expand(p, pi, k + 1, j, prob * row.safe[j], acc);
}

void next_policy(const Problem& p, Policy& pi) {
  for (std::size_t k = pi.rules.size(); k-- > 0;)
    for (StateIndex s = p.num_states(); s-- > 0;) {
      if (++pi.rules[k][s] < p.num_actions(s)) return;
      pi.rules[k][s] = 0;
    }
}

}  // namespace

std::uint64_t count_policies(const Problem& p, std::uint64_t budget) {
  std::uint64_t count = 1;
  for (int k = 0; k < p.horizon(); ++k)
    for (StateIndex s = 0; s < p.num_states(); ++s) {
      count *= p.num_actions(s);
      if (count > budget)
        raise(ErrorCode::budget, "policy enumeration needs more than " + std::to_string(budget) +
                                     " policies (budget " + std::to_string(budget) + ")");
    }
  return count;
}

Policy policy_at(const Problem& p, std::uint64_t index) {
  Policy pi;
  pi.rules.assign(static_cast<std::size_t>(p.horizon()), std::vector<ActionIndex>(p.num_states(), 0));
  for (std::size_t k = pi.rules.size(); k-- > 0;)
    for (StateIndex s = p.num_states(); s-- > 0;) {
      pi.rules[k][s] = static_cast<ActionIndex>(index % p.num_actions(s));
      index /= p.num_actions(s);
    }
  return pi;
}

void for_each_policy(const Problem& p, const std::function<void(std::uint64_t, const Policy&)>& visit,
                     std::uint64_t budget) {
  const std::uint64_t count = count_policies(p, budget);
  Policy pi = policy_at(p, 0);
  for (std::uint64_t i = 0; i < count; ++i) {
    visit(i, pi);
    next_policy(p, pi);
  }
}

PolicyStats exact_policy_stats(const Problem& p, const Policy& pi, std::uint64_t budget) {
  validate_policy(p, pi);
  double leaves = 1.0;
  for (int k = 0; k < p.horizon(); ++k) leaves *= static_cast<double>(p.num_states() + 1);
  if (leaves > static_cast<double>(budget))
    raise(ErrorCode::budget, "trajectory expansion needs (|S|+1)^N = " + std::to_string(leaves) +
                                 " paths, budget is " + std::to_string(budget));
  PolicyStats acc;
  expand(p, pi, 0, p.initial_state(), 1.0, acc);
  return acc;
}

const OracleRow& OracleResult::penalized_best(const PenaltySpec& zeta) const {
  if (rows.empty()) raise(ErrorCode::invalid_argument, "oracle has no rows");
  const OracleRow* best = &rows.front();
  double best_value = best->cost + apply_penalty(zeta, best->mwps);
  for (const auto& row : rows) {
    const double v = row.cost + apply_penalty(zeta, row.mwps);
    if (v < best_value) {
      best = &row;
      best_value = v;
    }
  }
  return *best;
}

OracleResult brute_force_constrained(const Problem& p, std::uint64_t policy_budget) {
  const std::uint64_t count = count_policies(p, policy_budget);
  exact_policy_stats(p, policy_at(p, 0));  // trajectory budget check

  OracleResult result;
  result.risk_bound = p.risk_bound();
  result.rows.resize(count);
  detail::parallel_for(count, 4096, [&](std::size_t begin, std::size_t end) {
    Policy pi = policy_at(p, begin);
    for (std::size_t i = begin; i < end; ++i) {
      PolicyStats acc;
      expand(p, pi, 0, p.initial_state(), 1.0, acc);
      result.rows[i] = OracleRow{i, acc.cost, acc.mwps};
      next_policy(p, pi);
    }
  });
  for (const auto& row : result.rows) {
    if (!result.feasible(row)) continue;
    if (!result.constrained_best || row.cost < result.rows[*result.constrained_best].cost)
      result.constrained_best = row.index;
  }
  return result;
}

}  // namespace mwcc
