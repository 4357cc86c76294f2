#pragma once

#include <cstdint>

#include "mwcc/closed_loop.hpp"
#include "mwcc/model.hpp"

namespace mwcc {

struct RolloutSummary {
  std::uint64_t rollouts = 0;
  double mean_cost = 0.0;
  double cost_std_error = 0.0;
  double safety_fraction = 0.0;
  double safety_std_error = 0.0;
};

/// Seed of rollout i: a fixed mix of the master seed and the index, so any
/// partition of the rollouts over threads reproduces the same draws.
std::uint64_t rollout_seed(std::uint64_t master, std::uint64_t index);

/// n closed-loop trajectories on the tabular chain. Cost accrues only while
/// the trajectory is safe. Throws Error(invalid_argument) for n == 0.
RolloutSummary simulate_rollouts(const Problem& p, const ClosedLoopPolicy& policy, std::uint64_t n,
                                 std::uint64_t seed);

/// n trajectories of the underlying continuous system of a discretized
/// problem. The controller sees the index of the cell holding the true state.
RolloutSummary simulate_continuous(const Problem& p, const ClosedLoopPolicy& policy, std::uint64_t n,
                                   std::uint64_t seed);

}  // namespace mwcc
