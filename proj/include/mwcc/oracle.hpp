#pragma once

// Exhaustive ground truth for tiny instances: every deterministic Markov
// policy, each scored by expanding the full trajectory tree.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mwcc/model.hpp"
#include "mwcc/penalty.hpp"

namespace mwcc {

inline constexpr std::uint64_t kDefaultPolicyBudget = 10'000'000;
inline constexpr std::uint64_t kDefaultTrajectoryBudget = 10'000'000;

/// prod over stages and states of the admissible action count; throws
/// Error(budget) above `budget`.
std::uint64_t count_policies(const Problem& p, std::uint64_t budget = kDefaultPolicyBudget);

/// Policy number `index` in lexicographic order of the flattened
/// (stage, state) action sequence.
Policy policy_at(const Problem& p, std::uint64_t index);

/// Visits every Markov policy in lexicographic order.
void for_each_policy(const Problem& p, const std::function<void(std::uint64_t, const Policy&)>& visit,
                     std::uint64_t budget = kDefaultPolicyBudget);

struct PolicyStats {
  double cost = 0.0;
  double mwps = 0.0;
};

/// Sums probability x cost over every trajectory of the safe+fail chain.
/// Throws Error(budget) when (|S|+1)^N exceeds `budget`.
PolicyStats exact_policy_stats(const Problem& p, const Policy& pi, std::uint64_t budget = kDefaultTrajectoryBudget);

struct OracleRow {
  std::uint64_t index = 0;
  double cost = 0.0;
  double mwps = 0.0;
};

struct OracleResult {
  std::vector<OracleRow> rows;  // one per policy, by index
  double risk_bound = 0.0;
  std::optional<std::uint64_t> constrained_best;  // nullopt: infeasible

  bool feasible(const OracleRow& row) const { return row.mwps >= 1.0 - risk_bound - kProbabilityTolerance; }

  /// Row minimizing cost + zeta(mwps); first index wins ties.
  const OracleRow& penalized_best(const PenaltySpec& zeta) const;
};

/// Scores every policy and picks the cheapest one meeting the MWPS bound
/// (first index on ties).
OracleResult brute_force_constrained(const Problem& p, std::uint64_t policy_budget = kDefaultPolicyBudget);

}  // namespace mwcc
