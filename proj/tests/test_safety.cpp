#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <utility>
#include <random>
#include <thread>

#include "mwcc/error.hpp"
#include "mwcc/oracle.hpp"
#include "mwcc/safety.hpp"
#include "mwcc/simulate.hpp"
#include "support/fixtures.hpp"

using namespace mwcc;

namespace {

// Two states, every row keeps all mass inside.
Problem leak_free() {
  ProblemData d;
  d.states = {"L", "R"};
  d.actions = {{"stay", "swap"}, {"stay", "swap"}};
  d.kernel = {{{0.7, 0.3}, {0.2, 0.8}}, {{0.4, 0.6}, {1.0, 0.0}}};
  d.stage_cost = {{1.0, 2.0}, {0.5, 0.0}};
  d.terminal_cost = {0.0, 3.0};
  d.horizon = 3;
  d.risk_bound = 0.0;
  return build_problem(d);
}

}  // namespace

TEST_CASE("backward recursion on chain-v1") {
  const Problem p = fixtures::chain_v1();
  const auto t = mwps_backward(p, fixtures::markov({{0}, {0}}));
  REQUIRE(t.values.size() == 3);
  CHECK(t.values[2][0] == 1.0);
  CHECK(t.values[1][0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(std::fabs(t.values[0][0] - 0.81) <= 1e-15);
  CHECK(std::fabs(mwps_backward(p, fixtures::markov({{0}, {1}})).at_initial(p) - 0.891) <= 1e-15);
}

TEST_CASE("forward propagation on chain-v1") {
  const Problem p = fixtures::chain_v1();
  const auto f0 = initial_functional_state(p);
  CHECK(f0.total() == 1.0);
  const ActionIndex a1 = 0, a2 = 1;
  const auto f1 = propagate(p, f0, std::span<const ActionIndex>(&a1, 1));
  CHECK(f1.stage == 1);
  CHECK(f1.mass[0] == 0.9);
  FunctionalState g{{0.9}, 1};
  CHECK(std::fabs(propagate(p, g, std::span<const ActionIndex>(&a2, 1)).mass[0] - 0.891) <= 1e-15);
  FunctionalState zero{{0.0}, 0};
  CHECK(propagate(p, zero, std::span<const ActionIndex>(&a1, 1)).total() == 0.0);
  CHECK(std::fabs(mwps_forward(p, fixtures::markov({{0}, {0}})) - 0.81) <= 1e-15);
  CHECK(std::fabs(mwps_forward(p, fixtures::markov({{1}, {1}})) - 0.9801) <= 1e-15);
}

TEST_CASE("propagate rejects a missing action on the support and a finished mission") {
  const Problem p = leak_free();
  const FunctionalState f{{0.5, 0.5}, 0};
  const ActionIndex rule[] = {0, kNoAction};
  CHECK_THROWS_AS(propagate(p, f, rule), Error);
  const FunctionalState off{{1.0, 0.0}, 0};
  CHECK(propagate(p, off, rule).total() == doctest::Approx(1.0));
  const FunctionalState done{{1.0, 0.0}, 3};
  const ActionIndex ok[] = {0, 0};
  CHECK_THROWS_AS(propagate(p, done, ok), Error);
}

TEST_CASE("no leak means certain safety by every route") {
  const Problem p = leak_free();
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const Policy pi = fixtures::random_policy(rng, p);
    for (const auto& stage : mwps_backward(p, pi).values)
      for (double v : stage) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mwps_forward(p, pi) == doctest::Approx(1.0).epsilon(1e-15));
    const auto mc = monte_carlo_mwps(p, pi, 2000, 17);
    CHECK(mc.mean == 1.0);
    CHECK(mc.std_error == 0.0);
  }
}

TEST_CASE("property: backward, forward and trajectory sums agree") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 300; ++t) {
    const auto d = fixtures::random_data(rng, {6, 3, 4}, t % 3 == 0);
    const Problem p = build_problem(d);
    const Policy pi = fixtures::random_policy(rng, p);
    const double back = mwps_backward(p, pi).at_initial(p);
    const double fwd = mwps_forward(p, pi);
    const double naive = fixtures::naive_stats(d, pi).mwps;
    CHECK(std::fabs(back - fwd) <= 1e-12);
    CHECK(std::fabs(back - naive) <= 1e-12);
  }
}

TEST_CASE("property: values stay in [0,1] and F mass never grows") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 200; ++t) {
    const Problem p = fixtures::random_problem(rng, {6, 3, 4});
    const Policy pi = fixtures::random_policy(rng, p);
    const auto table = mwps_backward(p, pi);
    for (const auto& stage : table.values)
      for (double v : stage) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-12);
      }
    for (double v : table.values.back()) CHECK(v == 1.0);
    FunctionalState f = initial_functional_state(p);
    double prev = f.total();
    for (int k = 0; k < p.horizon(); ++k) {
      f = propagate(p, f, pi.rules[static_cast<std::size_t>(k)]);
      CHECK(f.total() <= prev + 1e-15);
      prev = f.total();
    }
  }
}

TEST_CASE("Monte Carlo on chain-v1 covers 0.81") {
  const Problem p = fixtures::chain_v1();
  const Policy pi = fixtures::markov({{0}, {0}});
  const auto e = monte_carlo_mwps(p, pi, 100000, 1234567);
  CHECK(e.samples == 100000);
  const double band = 3.0 * std::sqrt(0.81 * 0.19 / 100000.0);
  CHECK(std::fabs(e.mean - 0.81) <= band);

  int misses = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = monte_carlo_mwps(p, pi, 100000, seed);
    if (std::fabs(r.mean - 0.81) > 3.0 * r.std_error) ++misses;
  }
  CHECK(misses <= 1);
}

TEST_CASE("Monte Carlo is reproducible and single draws are Bernoulli") {
  const Problem p = fixtures::chain_v1();
  const Policy pi = fixtures::markov({{0}, {1}});
  const auto a = monte_carlo_mwps(p, pi, 5000, 42);
  const auto b = monte_carlo_mwps(p, pi, 5000, 42);
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const double m = monte_carlo_mwps(p, pi, 1, seed).mean;
    CHECK((m == 0.0 || m == 1.0));
  }
  CHECK_THROWS_AS(monte_carlo_mwps(p, pi, 0, 1), Error);
}

TEST_CASE("rollout seeds depend only on (master, index)") {
  CHECK(rollout_seed(7, 3) == rollout_seed(7, 3));
  CHECK(rollout_seed(7, 3) != rollout_seed(7, 4));
  CHECK(rollout_seed(7, 3) != rollout_seed(8, 3));
}

TEST_CASE("results do not depend on the worker count") {
  std::mt19937_64 rng(8);
  const Problem p = fixtures::random_problem(rng, {6, 3, 4});
  const Policy pi = fixtures::random_policy(rng, p);
  auto run = [&](const char* threads) {
    setenv("MWCC_THREADS", threads, 1);
    const auto mc = monte_carlo_mwps(p, pi, 30000, 77);
    const auto table = mwps_backward(p, pi);
    unsetenv("MWCC_THREADS");
    return std::make_pair(mc, table);
  };
  const auto [mc1, t1] = run("1");
  const auto [mc4, t4] = run("4");
  CHECK(mc1.mean == mc4.mean);
  CHECK(mc1.std_error == mc4.std_error);
  CHECK(t1.values == t4.values);
}
