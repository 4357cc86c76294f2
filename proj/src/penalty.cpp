#include "mwcc/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>

#include "mwcc/augmented.hpp"
#include "mwcc/error.hpp"
#include "mwcc/safety.hpp"
#include "parallel.hpp"

namespace mwcc {

double apply_penalty(const PenaltySpec& zeta, double x) {
  if (const auto* affine = std::get_if<AffinePenalty>(&zeta)) return affine->slope * x + affine->offset;
  return terminal_penalty(x, std::get<ExactPenalty>(zeta).risk_bound);
}

PenaltySolution solve_affine_penalty(const Problem& p, double slope, double offset) {
  if (!std::isfinite(slope) || !std::isfinite(offset))
    raise(ErrorCode::invalid_argument, "affine penalty parameters must be finite");
  const std::size_t n = p.num_states();
  const auto horizon = static_cast<std::size_t>(p.horizon());

  PenaltySolution sol;
  sol.table.fail_value = offset;
  sol.table.values.assign(horizon + 1, std::vector<double>(n, 0.0));
  sol.policy.rules.assign(horizon, std::vector<ActionIndex>(n, 0));
  for (StateIndex s = 0; s < n; ++s) sol.table.values[horizon][s] = p.terminal_cost(s) + slope + offset;

  for (std::size_t k = horizon; k-- > 0;) {
    const auto& next = sol.table.values[k + 1];
    auto& cur = sol.table.values[k];
    auto& rule = sol.policy.rules[k];
    detail::parallel_for(n, 64, [&](std::size_t begin, std::size_t end) {
      for (StateIndex s = begin; s < end; ++s) {
        double best = std::numeric_limits<double>::infinity();
        ActionIndex best_a = 0;
        for (ActionIndex a = 0; a < p.num_actions(s); ++a) {
          const TransitionRow& row = p.row(s, a);
          double q = p.stage_cost(s, a) + row.fail * offset;
          for (std::size_t j = row.first; j < row.last; ++j) q += next[j] * row.safe[j];
          if (q < best) {
            best = q;
            best_a = a;
          }
        }
        cur[s] = best;
        rule[s] = best_a;
      }
    });
  }
  sol.value = sol.table.values[0][p.initial_state()];
  return sol;
}

PenaltySolution solve_penalty(const Problem& p, const PenaltySpec& zeta) {
  if (const auto* affine = std::get_if<AffinePenalty>(&zeta)) return solve_affine_penalty(p, affine->slope, affine->offset);
  raise(ErrorCode::unsupported,
        "the exact 0/inf penalty does not commute with the expectation operator, so the state-space "
        "recursion does not apply; use the augmented solver instead");
}

CommutationReport check_commutation(const PenaltySpec& zeta, std::span<const ScenarioOutcome> scenario) {
  if (scenario.empty()) raise(ErrorCode::invalid_argument, "scenario has no outcomes");
  double total = 0.0;
  double mean = 0.0;
  for (const auto& o : scenario) {
    if (!(o.probability >= 0.0) || !(o.value >= 0.0 && o.value <= 1.0 + kProbabilityTolerance))
      raise(ErrorCode::invalid_argument, "scenario outcomes need values in [0,1] and non-negative probabilities");
    total += o.probability;
    mean += o.probability * o.value;
  }
  if (std::abs(total - 1.0) > 1e-9) raise(ErrorCode::invalid_argument, "scenario probabilities must sum to 1");

  CommutationReport r;
  r.lhs = apply_penalty(zeta, mean);
  r.rhs = 0.0;
  for (const auto& o : scenario) {
    if (o.probability == 0.0) continue;
    r.rhs += o.probability * apply_penalty(zeta, o.value);
  }
  if (std::isinf(r.lhs) || std::isinf(r.rhs))
    r.commutes = r.lhs == r.rhs;
  else
    r.commutes = std::abs(r.lhs - r.rhs) <= kProbabilityTolerance;
  return r;
}

double expected_cost(const Problem& p, const Policy& pi) {
  validate_policy(p, pi);
  const std::size_t n = p.num_states();
  std::vector<double> next(n), cur(n);
  for (StateIndex s = 0; s < n; ++s) next[s] = p.terminal_cost(s);
  for (std::size_t k = pi.rules.size(); k-- > 0;) {
    for (StateIndex s = 0; s < n; ++s) {
      const ActionIndex a = pi.rules[k][s];
      const TransitionRow& row = p.row(s, a);
      double v = p.stage_cost(s, a);
      for (std::size_t j = row.first; j < row.last; ++j) v += next[j] * row.safe[j];
      cur[s] = v;
    }
    std::swap(cur, next);
  }
  return next[p.initial_state()];
}

std::vector<SweepRow> sweep_lambda(const Problem& p, std::vector<double> lambdas, std::optional<double> delta) {
  std::sort(lambdas.begin(), lambdas.end());
  std::vector<SweepRow> rows;
  rows.reserve(lambdas.size());
  for (double lambda : lambdas) {
    SweepRow row;
    row.lambda = lambda;
    row.delta = delta.value_or(-lambda);
    PenaltySolution sol = solve_affine_penalty(p, row.lambda, row.delta);
    row.objective = sol.value;
    row.cost = expected_cost(p, sol.policy);
    row.mwps = mwps_backward(p, sol.policy).at_initial(p);
    row.policy = std::move(sol.policy);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string policy_id(const Policy& pi) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& rule : pi.rules) {
    mix(rule.size());
    for (ActionIndex a : rule) mix(a);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mwcc
