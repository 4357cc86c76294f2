#include "mwcc/simulate.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "mwcc/error.hpp"
#include "parallel.hpp"

namespace mwcc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

struct Outcome {
  double cost = 0.0;
  bool safe = true;
};

RolloutSummary summarize(const std::vector<Outcome>& outcomes) {
  const auto n = static_cast<double>(outcomes.size());
  RolloutSummary s;
  s.rollouts = outcomes.size();
  double cost_sum = 0.0;
  std::uint64_t safe = 0;
  for (const auto& o : outcomes) {
    cost_sum += o.cost;
    safe += o.safe ? 1 : 0;
  }
  s.mean_cost = cost_sum / n;
  double sq = 0.0;
  for (const auto& o : outcomes) sq += (o.cost - s.mean_cost) * (o.cost - s.mean_cost);
  s.cost_std_error = outcomes.size() > 1 ? std::sqrt(sq / (n - 1.0) / n) : 0.0;
  s.safety_fraction = static_cast<double>(safe) / n;
  s.safety_std_error = std::sqrt(s.safety_fraction * (1.0 - s.safety_fraction) / n);
  return s;
}

template <class Rollout>
RolloutSummary run(std::uint64_t n, std::uint64_t seed, Rollout&& rollout) {
  if (n == 0) raise(ErrorCode::invalid_argument, "rollout count must be >= 1");
  std::vector<Outcome> outcomes(n);
  detail::parallel_for(n, 2048, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      std::mt19937_64 gen(rollout_seed(seed, i));
      outcomes[i] = rollout(gen);
    }
  });
  return summarize(outcomes);
}

}  // namespace

std::uint64_t rollout_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

RolloutSummary simulate_rollouts(const Problem& p, const ClosedLoopPolicy& policy, std::uint64_t n,
                                 std::uint64_t seed) {
  const int horizon = p.horizon();
  return run(n, seed, [&](std::mt19937_64& gen) {
    Outcome out;
    StateIndex s = p.initial_state();
    std::size_t node = policy.root();
    for (int k = 0; k < horizon; ++k) {
      const ActionIndex a = policy.action(node, s);
      out.cost += p.stage_cost(s, a);
      const TransitionRow& row = p.row(s, a);
      const double u = uniform01(gen);
      double acc = 0.0;
      StateIndex next = p.num_states();
      for (std::size_t j = row.first; j < row.last; ++j) {
        acc += row.safe[j];
        if (u < acc) {
          next = j;
          break;
        }
      }
      node = policy.next(node, s);
      if (next == p.num_states()) {
        out.safe = false;
        return out;
      }
      s = next;
    }
    out.cost += p.terminal_cost(s);
    return out;
  });
}

RolloutSummary simulate_continuous(const Problem& p, const ClosedLoopPolicy& policy, std::uint64_t n,
                                   std::uint64_t seed) {
  const GridModel* grid = p.grid();
  if (!grid) raise(ErrorCode::unsupported, "continuous simulation needs a discretized problem");
  const ContinuousSpec& c = grid->spec;
  const int horizon = p.horizon();
  return run(n, seed, [&](std::mt19937_64& gen) {
    std::normal_distribution<double> noise(0.0, c.noise_std);
    Outcome out;
    double x = c.initial_value;
    std::size_t node = policy.root();
    for (int k = 0; k < horizon; ++k) {
      const StateIndex cell = grid->locate(x);
      const ActionIndex a = policy.action(node, cell);
      const double u = grid->action_values[a];
      out.cost += c.stage_state_weight * x * x + c.stage_action_weight * u * u;
      x = c.drift + c.state_gain * x + c.action_gain * u + noise(gen);
      node = policy.next(node, cell);
      if (!grid->inside(x)) {
        out.safe = false;
        return out;
      }
    }
    out.cost += c.terminal_state_weight * x * x;
    return out;
  });
}

}  // namespace mwcc
