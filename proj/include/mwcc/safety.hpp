#pragma once

// Mission-wide probability of safety (MWPS) of a fixed Markov policy,
// computed three independent ways.

#include <cstdint>
#include <span>
#include <vector>

#include "mwcc/model.hpp"

namespace mwcc {

/// values[k][s] = probability of staying safe through stage N from state s at
/// stage k. values[N] is identically 1.
struct SafetyValueTable {
  std::vector<std::vector<double>> values;

  double at_initial(const Problem& p) const { return values.front()[p.initial_state()]; }
};

/// Sub-probability vector over safe states: mass of trajectories that are at
/// s at `stage` and have not left the safe set.
struct FunctionalState {
  std::vector<double> mass;
  int stage = 0;

  double total() const;
};

/// Unit point mass at the initial state.
FunctionalState initial_functional_state(const Problem& p);

SafetyValueTable mwps_backward(const Problem& p, const Policy& pi);

/// One step of the forward linear dynamics. `rule[s]` must name an admissible
/// action for every state carrying positive mass; other entries may be
/// kNoAction.
FunctionalState propagate(const Problem& p, const FunctionalState& f, std::span<const ActionIndex> rule);

double mwps_forward(const Problem& p, const Policy& pi);

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
};

/// Fraction of n seeded closed-loop rollouts that stay safe, with its binomial
/// standard error. Reproducible for fixed (seed, n) on any thread count.
Estimate monte_carlo_mwps(const Problem& p, const Policy& pi, std::uint64_t n, std::uint64_t seed);

}  // namespace mwcc
