#pragma once

// Fixtures, random tiny instances and a naive test-side oracle. The oracle
// deliberately shares no code with the library: it walks every state sequence
// in (S + fail)^N with an odometer and multiplies kernel entries read straight
// from ProblemData.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "mwcc/model.hpp"

namespace fixtures {

using mwcc::ActionIndex;
using mwcc::Policy;
using mwcc::Problem;
using mwcc::ProblemData;
using mwcc::StateIndex;

inline ProblemData chain_v1_data(double risk = 0.15) {
  ProblemData d;
  d.states = {"A"};
  d.fail = "X";
  d.actions = {{"a1", "a2"}};
  d.kernel = {{{0.9}, {0.99}}};
  d.stage_cost = {{0.0, 1.0}};
  d.terminal_cost = {0.0};
  d.horizon = 2;
  d.risk_bound = risk;
  d.initial_state = 0;
  return d;
}

inline Problem chain_v1(double risk = 0.15) { return mwcc::build_problem(chain_v1_data(risk)); }

inline Policy markov(std::vector<std::vector<ActionIndex>> rules) { return Policy{std::move(rules)}; }

struct Sizes {
  std::size_t max_states = 4;
  std::size_t max_actions = 3;
  int max_horizon = 3;
};

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Rows mix sparse supports, exact zeros and occasional leak-free rows, so the
// structural-support code paths all get exercised.
inline ProblemData random_data(std::mt19937_64& rng, const Sizes& sz, bool ragged_actions = false) {
  ProblemData d;
  const std::size_t n = pick(rng, 1, sz.max_states);
  const std::size_t m = pick(rng, 1, sz.max_actions);
  for (std::size_t s = 0; s < n; ++s) d.states.push_back("s" + std::to_string(s));
  d.fail = "fail";
  d.actions.resize(n);
  d.kernel.resize(n);
  d.stage_cost.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t ms = ragged_actions ? pick(rng, 1, sz.max_actions) : m;
    for (std::size_t a = 0; a < ms; ++a) {
      d.actions[s].push_back("a" + std::to_string(a));
      std::vector<double> w(n + 1, 0.0);
      for (auto& x : w)
        if (pick(rng, 0, 3) != 0) x = uniform(rng, 0.0, 1.0);
      if (pick(rng, 0, 5) == 0) w[n] = 0.0;  // no leak
      if (pick(rng, 0, 7) == 0) w[n] = 5.0;  // heavy leak
      double total = 0.0;
      for (double x : w) total += x;
      if (total == 0.0) {
        w[pick(rng, 0, n)] = 1.0;
        total = 1.0;
      }
      std::vector<double> row(n);
      for (std::size_t j = 0; j < n; ++j) row[j] = w[j] / total;
      d.kernel[s].push_back(row);
      d.stage_cost[s].push_back(uniform(rng, 0.0, 2.0));
    }
  }
  for (std::size_t s = 0; s < n; ++s) d.terminal_cost.push_back(uniform(rng, 0.0, 2.0));
  d.horizon = static_cast<int>(pick(rng, 1, static_cast<std::size_t>(sz.max_horizon)));
  d.risk_bound = uniform(rng, 0.0, 0.6);
  d.initial_state = pick(rng, 0, n - 1);
  return d;
}

inline Problem random_problem(std::mt19937_64& rng, const Sizes& sz, bool ragged_actions = false) {
  return mwcc::build_problem(random_data(rng, sz, ragged_actions));
}

inline Policy random_policy(std::mt19937_64& rng, const Problem& p) {
  Policy pi;
  pi.rules.resize(static_cast<std::size_t>(p.horizon()));
  for (auto& rule : pi.rules)
    for (StateIndex s = 0; s < p.num_states(); ++s) rule.push_back(pick(rng, 0, p.num_actions(s) - 1));
  return pi;
}

struct NaiveStats {
  double cost = 0.0;
  double mwps = 0.0;
};

// Index n stands for the fail state.
inline NaiveStats naive_stats(const ProblemData& d, const Policy& pi) {
  const std::size_t n = d.states.size();
  const std::size_t len = static_cast<std::size_t>(d.horizon);
  std::vector<std::size_t> seq(len, 0);
  NaiveStats out;
  while (true) {
    double prob = 1.0;
    double cost = 0.0;
    std::size_t cur = d.initial_state;
    bool safe = true;
    for (std::size_t k = 0; k < len && prob > 0.0; ++k) {
      const std::size_t nxt = seq[k];
      if (cur == n) {
        if (nxt != n) prob = 0.0;  // fail is absorbing
        continue;
      }
      const ActionIndex a = pi.rules[k][cur];
      cost += d.stage_cost[cur][a];
      const auto& row = d.kernel[cur][a];
      double pr;
      if (nxt == n) {
        double sum = 0.0;
        for (double x : row) sum += x;
        pr = std::clamp(1.0 - sum, 0.0, 1.0);
        safe = false;
      } else {
        pr = row[nxt];
      }
      prob *= pr;
      cur = nxt;
    }
    if (prob > 0.0) {
      if (cur != n) cost += d.terminal_cost[cur];
      out.cost += prob * cost;
      if (safe) out.mwps += prob;
    }
    std::size_t i = len;
    while (i > 0) {
      --i;
      if (++seq[i] <= n) break;
      seq[i] = 0;
      if (i == 0) return out;
    }
    if (len == 0) return out;
  }
}

// Calls fn(policy) for every Markov policy, last (stage, state) varying fastest.
template <class Fn>
void each_policy(const ProblemData& d, Fn&& fn) {
  const std::size_t n = d.states.size();
  Policy pi;
  pi.rules.assign(static_cast<std::size_t>(d.horizon), std::vector<ActionIndex>(n, 0));
  while (true) {
    fn(static_cast<const Policy&>(pi));
    bool carried = true;
    for (std::size_t k = pi.rules.size(); k-- > 0 && carried;)
      for (std::size_t s = n; s-- > 0;) {
        if (++pi.rules[k][s] < d.actions[s].size()) {
          carried = false;
          break;
        }
        pi.rules[k][s] = 0;
      }
    if (carried) return;
  }
}

struct NaiveOptimum {
  bool feasible = false;
  double value = std::numeric_limits<double>::infinity();
  Policy policy;
};

inline NaiveOptimum naive_constrained(const ProblemData& d) {
  NaiveOptimum best;
  each_policy(d, [&](const Policy& pi) {
    const auto st = naive_stats(d, pi);
    if (st.mwps >= 1.0 - d.risk_bound - 1e-12 && st.cost < best.value) {
      best = {true, st.cost, pi};
    }
  });
  return best;
}

// (stage, state) pairs a Markov policy visits with positive probability.
inline std::set<std::pair<int, StateIndex>> reachable_pairs(const Problem& p, const Policy& pi) {
  std::set<std::pair<int, StateIndex>> out;
  std::vector<char> here(p.num_states(), 0);
  here[p.initial_state()] = 1;
  for (int k = 0; k < p.horizon(); ++k) {
    std::vector<char> next(p.num_states(), 0);
    for (StateIndex s = 0; s < p.num_states(); ++s) {
      if (!here[s]) continue;
      out.emplace(k, s);
      const auto& row = p.row(s, pi.rules[static_cast<std::size_t>(k)][s]);
      for (StateIndex j = 0; j < p.num_states(); ++j)
        if (row.safe[j] > 0.0) next[j] = 1;
    }
    here = std::move(next);
  }
  return out;
}

// Agreement on every pair either policy can actually reach.
inline bool same_on_reachable(const Problem& p, const Policy& a, const Policy& b) {
  auto pairs = reachable_pairs(p, a);
  auto more = reachable_pairs(p, b);
  pairs.insert(more.begin(), more.end());
  for (const auto& [k, s] : pairs)
    if (a.rules[static_cast<std::size_t>(k)][s] != b.rules[static_cast<std::size_t>(k)][s]) return false;
  return true;
}

}  // namespace fixtures
