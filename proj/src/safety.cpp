#include "mwcc/safety.hpp"

#include <string>

#include "mwcc/closed_loop.hpp"
#include "mwcc/error.hpp"
#include "mwcc/simulate.hpp"
#include "parallel.hpp"

namespace mwcc {

double FunctionalState::total() const {
  double sum = 0.0;
  for (double m : mass) sum += m;
  return sum;
}

FunctionalState initial_functional_state(const Problem& p) {
  FunctionalState f;
  f.mass.assign(p.num_states(), 0.0);
  f.mass[p.initial_state()] = 1.0;
  f.stage = 0;
  return f;
}

SafetyValueTable mwps_backward(const Problem& p, const Policy& pi) {
  validate_policy(p, pi);
  const std::size_t n = p.num_states();
  const auto horizon = static_cast<std::size_t>(p.horizon());
  SafetyValueTable table;
  table.values.assign(horizon + 1, std::vector<double>(n, 0.0));
  table.values[horizon].assign(n, 1.0);
  for (std::size_t k = horizon; k-- > 0;) {
    const auto& next = table.values[k + 1];
    auto& cur = table.values[k];
    detail::parallel_for(n, 256, [&](std::size_t begin, std::size_t end) {
      for (StateIndex s = begin; s < end; ++s) {
        const TransitionRow& row = p.row(s, pi.rules[k][s]);
        double v = 0.0;
        for (std::size_t j = row.first; j < row.last; ++j) v += next[j] * row.safe[j];
        cur[s] = v;
      }
    });
  }
  return table;
}

FunctionalState propagate(const Problem& p, const FunctionalState& f, std::span<const ActionIndex> rule) {
  const std::size_t n = p.num_states();
  if (f.mass.size() != n || rule.size() != n)
    raise(ErrorCode::invalid_argument, "functional state and rule must cover every safe state");
  if (f.stage >= p.horizon()) raise(ErrorCode::invalid_argument, "functional state is already at the horizon");
  FunctionalState out;
  out.mass.assign(n, 0.0);
  out.stage = f.stage + 1;
  for (StateIndex s = 0; s < n; ++s) {
    const double w = f.mass[s];
    if (w == 0.0) continue;
    if (rule[s] == kNoAction || rule[s] >= p.num_actions(s))
      raise(ErrorCode::invalid_argument, "decision rule has no admissible action for supported state '" +
                                             p.state_name(s) + "' at stage " + std::to_string(f.stage));
    const TransitionRow& row = p.row(s, rule[s]);
    for (std::size_t j = row.first; j < row.last; ++j) out.mass[j] += w * row.safe[j];
  }
  return out;
}

double mwps_forward(const Problem& p, const Policy& pi) {
  validate_policy(p, pi);
  FunctionalState f = initial_functional_state(p);
  for (const auto& rule : pi.rules) f = propagate(p, f, rule);
  return f.total();
}

Estimate monte_carlo_mwps(const Problem& p, const Policy& pi, std::uint64_t n, std::uint64_t seed) {
  validate_policy(p, pi);
  const RolloutSummary summary = simulate_rollouts(p, MarkovClosedLoop(pi), n, seed);
  return Estimate{summary.safety_fraction, summary.safety_std_error, summary.rollouts};
}

}  // namespace mwcc
