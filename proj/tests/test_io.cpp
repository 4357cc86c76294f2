#include <doctest.h>

#include <functional>
#include <json.hpp>
#include <random>
#include <string>

#include "mwcc/augmented.hpp"
#include "mwcc/error.hpp"
#include "mwcc/io.hpp"
#include "mwcc/oracle.hpp"
#include "mwcc/penalty.hpp"
#include "mwcc/safety.hpp"
#include "support/fixtures.hpp"

using namespace mwcc;
using nlohmann::json;

namespace {

std::string repo_file(const char* name) { return std::string(MWCC_REPO_DATA_DIR) + "/" + name; }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::invalid_argument;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

// Bitwise equality of everything the solvers read.
bool same_problem(const Problem& a, const Problem& b) {
  if (a.num_states() != b.num_states() || a.horizon() != b.horizon() || a.risk_bound() != b.risk_bound() ||
      a.initial_state() != b.initial_state() || a.fail_name() != b.fail_name())
    return false;
  for (StateIndex s = 0; s < a.num_states(); ++s) {
    if (a.state_name(s) != b.state_name(s) || a.num_actions(s) != b.num_actions(s)) return false;
    if (a.terminal_cost(s) != b.terminal_cost(s)) return false;
    for (ActionIndex u = 0; u < a.num_actions(s); ++u) {
      if (a.action_name(s, u) != b.action_name(s, u) || a.stage_cost(s, u) != b.stage_cost(s, u)) return false;
      const auto& ra = a.row(s, u);
      const auto& rb = b.row(s, u);
      if (ra.safe != rb.safe || ra.fail != rb.fail) return false;
    }
  }
  return true;
}

const char* kChain = R"({
  "states": ["A"], "fail": "X", "actions": {"A": ["a1", "a2"]},
  "kernel": [{"state": "A", "action": "a1", "next": {"A": 0.9}},
             {"state": "A", "action": "a2", "next": {"A": 0.99}}],
  "stage_cost": {"A": {"a1": 0, "a2": 1}}, "terminal_cost": {"A": 0},
  "horizon": 2, "risk_bound": RISK, "initial_state": "A"
})";

std::string chain_text(const std::string& risk) {
  std::string t = kChain;
  t.replace(t.find("RISK"), 4, risk);
  return t;
}

}  // namespace

TEST_CASE("packaged problems load") {
  const Problem chain = load_problem(repo_file("chain-v1.json"));
  CHECK(chain.num_states() == 1);
  CHECK(chain.fail_name() == "X");
  CHECK(chain.risk_bound() == 0.15);
  CHECK(same_problem(chain, fixtures::chain_v1()));

  const Problem cs = load_problem(repo_file("casestudy.json"));
  CHECK(cs.num_states() == 401);
  CHECK(cs.max_actions() == 21);
  REQUIRE(cs.grid() != nullptr);
  CHECK(cs.grid()->spec.noise_std == 0.01);
  CHECK(cs.grid()->spec.initial_value == 0.5);

  const Problem ra = load_problem(repo_file("casestudy-risk-active.json"));
  CHECK(ra.grid()->spec.noise_std == 0.05);
  CHECK(ra.grid()->spec.initial_value == 0.9);
}

TEST_CASE("validation failures carry the validation code") {
  CHECK(code_of([] { parse_problem(chain_text("1.5")); }) == ErrorCode::validation);
  CHECK(message_of([] { parse_problem(chain_text("1.5")); }).find("risk_bound") != std::string::npos);
  CHECK(code_of([] { parse_problem(chain_text("-0.1")); }) == ErrorCode::validation);
  CHECK_NOTHROW(parse_problem(chain_text("0")));
  CHECK_NOTHROW(parse_problem(chain_text("1")));
}

TEST_CASE("unknown keys are rejected") {
  std::string t = chain_text("0.15");
  t.insert(t.rfind('}'), R"(, "horizn": 3)");
  CHECK(code_of([&] { parse_problem(t); }) == ErrorCode::validation);
  CHECK(message_of([&] { parse_problem(t); }).find("horizn") != std::string::npos);

  std::string cs = read_text_file(repo_file("casestudy.json"));
  cs.replace(cs.find("\"drift\""), 7, "\"drfit\"");
  CHECK(code_of([&] { parse_problem(cs); }) == ErrorCode::validation);
}

TEST_CASE("syntax errors report line and column") {
  const std::string bad = "{\n  \"states\": [\"A\"],\n  \"fail\" \"X\"\n}";
  CHECK(code_of([&] { parse_problem(bad); }) == ErrorCode::parse);
  const std::string msg = message_of([&] { parse_problem(bad); });
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("column") != std::string::npos);
  CHECK(code_of([] { load_problem("/nonexistent/problem.json"); }) == ErrorCode::io);
}

TEST_CASE("schema_version must match") {
  std::string t = chain_text("0.15");
  t.insert(1, R"("schema_version": 2,)");
  CHECK(code_of([&] { parse_problem(t); }) == ErrorCode::validation);
  t = chain_text("0.15");
  t.insert(1, R"("schema_version": 1,)");
  CHECK_NOTHROW(parse_problem(t));
}

TEST_CASE("missing kernel rows and stray names are named") {
  std::string t = chain_text("0.15");
  t.replace(t.find(R"(,
             {"state": "A", "action": "a2", "next": {"A": 0.99}})"),
            std::string(R"(,
             {"state": "A", "action": "a2", "next": {"A": 0.99}})").size(), "");
  const auto msg = message_of([&] { parse_problem(t); });
  CHECK(msg.find("a2") != std::string::npos);
  std::string u = chain_text("0.15");
  u.replace(u.find("{\"A\": 0.9}"), 10, "{\"B\": 0.9}");
  CHECK(message_of([&] { parse_problem(u); }).find("B") != std::string::npos);
}

TEST_CASE("property: problem JSON round-trips bit for bit") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 100; ++t) {
    const Problem p = fixtures::random_problem(rng, {6, 3, 4}, t % 2 == 0);
    const std::string text = problem_to_json(p);
    const Problem q = parse_problem(text);
    CHECK(same_problem(p, q));
    CHECK(problem_to_json(q) == text);
  }
  ContinuousSpec c = *casestudy_spec("nominal");
  c.noise_std = 0.2;
  const Problem d = discretize(c, {61, 5});
  const Problem back = parse_problem(problem_to_json(d));
  CHECK(same_problem(d, back));
  CHECK(back.grid() == nullptr);
}

TEST_CASE("policy files") {
  const Problem p = fixtures::chain_v1();
  const Policy pi = fixtures::markov({{0}, {1}});
  const std::string text = policy_to_json(p, pi);
  CHECK(parse_policy(p, text) == pi);
  CHECK(policy_string(p, pi) == "a1|a2");
  CHECK(code_of([&] { parse_policy(p, R"({"rules": [{"A": "a3"}, {"A": "a1"}]})"); }) == ErrorCode::validation);
  CHECK(code_of([&] { parse_policy(p, R"({"rules": [{"A": "a1"}]})"); }) == ErrorCode::validation);
  CHECK(code_of([&] { parse_policy(p, R"({"rules": [{"A": "a1"}, {"A": "a1", "B": "a1"}]})"); }) ==
        ErrorCode::validation);
  CHECK(code_of([&] { parse_policy(p, R"({"rules": [], "extra": 1})"); }) == ErrorCode::validation);
}

TEST_CASE("CSV tables") {
  const Problem p = fixtures::chain_v1();
  const std::string safety = safety_table_csv(p, mwps_backward(p, fixtures::markov({{0}, {0}})));
  CHECK(safety.rfind("stage,state,value\n", 0) == 0);
  CHECK(safety.find("0,A,0.81") != std::string::npos);
  CHECK(safety.find("2,A,1\n") != std::string::npos);

  const std::string sweep = sweep_csv(sweep_lambda(p, {-12.0, -10.0}));
  CHECK(sweep.rfind("lambda,delta,objective,cost,mwps,policy_id\n", 0) == 0);
  CHECK(sweep.find("\n-12,12,") != std::string::npos);

  const std::string oracle = oracle_csv(p, brute_force_constrained(p));
  CHECK(oracle.rfind("policy,cost,mwps,feasible\n", 0) == 0);
  CHECK(oracle.find("\na1|a1,0,0.81000000000000005,0\n") != std::string::npos);
  CHECK(oracle.find("\na1|a2,0.90000000000000002,0.89100000000000001,1\n") != std::string::npos);
  CHECK(oracle.find("a2|a2,1.99") != std::string::npos);
}

TEST_CASE("solve report JSON") {
  const Problem p = fixtures::chain_v1();
  const json doc = json::parse(solve_report_json(p, solve_augmented(p, PropagationMode::joint)));
  for (const char* key : {"schema_version", "mode", "verdict", "value", "risk_bound", "horizon", "initial_state",
                          "expected_cost", "internal_mwps", "closed_loop_mwps", "closed_loop_mwps_backward",
                          "mwps_discrepancy", "node_counts", "num_states", "policy"})
    CHECK(doc.contains(key));
  CHECK(doc["schema_version"] == kSchemaVersion);
  CHECK(doc["verdict"] == "feasible");
  CHECK(doc["mode"] == "joint");
  CHECK(doc["node_counts"] == json::array({1, 2, 4}));
  CHECK(doc["policy"].size() == 2);
  CHECK(doc["policy"][1]["action"] == "a2");

  const Problem tight = fixtures::chain_v1(0.01);
  const json none = json::parse(solve_report_json(tight, solve_augmented(tight, PropagationMode::literal)));
  CHECK(none["verdict"] == "infeasible");
  CHECK(none["value"].is_null());
  CHECK(none["closed_loop_mwps"].is_null());
  CHECK(none["policy"].empty());
  CHECK(none["mwps_discrepancy"] == false);
}

TEST_CASE("number formatting") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(kInfeasible) == "inf");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("case-study variants") {
  CHECK(casestudy_spec("nominal").has_value());
  CHECK(casestudy_spec("risk-active")->noise_std == 0.05);
  CHECK_FALSE(casestudy_spec("other").has_value());
}
