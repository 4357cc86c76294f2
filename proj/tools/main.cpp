// mwcc command-line tool. Talks to the library only through mwcc.h.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mwcc/mwcc.h"

using json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kDefaultSeed = 1234567;
constexpr std::uint64_t kDefaultRollouts = 100000;
constexpr int kSchemaVersion = 1;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

struct Failure {
  std::string code;
  std::string message;
};

void check(mwcc_status st) {
  if (st != MWCC_OK) throw Failure{mwcc_status_name(st), mwcc_last_error()};
}

[[noreturn]] void fail(const std::string& code, const std::string& message) { throw Failure{code, message}; }

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using ProblemPtr = std::unique_ptr<mwcc_problem, Deleter<mwcc_problem, mwcc_problem_free>>;
using PolicyPtr = std::unique_ptr<mwcc_policy, Deleter<mwcc_policy, mwcc_policy_free>>;
using ReportPtr = std::unique_ptr<mwcc_solve_report, Deleter<mwcc_solve_report, mwcc_report_free>>;
using OraclePtr = std::unique_ptr<mwcc_oracle, Deleter<mwcc_oracle, mwcc_oracle_free>>;

std::string take(char* s) {
  std::string out = s != nullptr ? s : "";
  mwcc_string_free(s);
  return out;
}

struct Options {
  std::string problem;
  std::string policy;
  std::string mode = "joint";
  std::optional<double> epsilon;
  std::vector<double> lambdas;
  std::optional<double> delta;
  std::uint64_t seed = kDefaultSeed;
  std::uint64_t rollouts = kDefaultRollouts;
  std::size_t grid_cells = 401;
  std::size_t actions = 21;
  std::optional<std::uint64_t> budget;
  std::optional<std::uint64_t> rule_budget;
  std::string out = "mwcc-out";
  std::string variant = "nominal";
  bool quiet = false;
};

class Run {
 public:
  Run(std::string name, const Options& opt) : name_(std::move(name)), opt_(opt), start_(Clock::now()) {
    std::error_code ec;
    std::filesystem::create_directories(opt_.out, ec);
    if (ec) fail("io", "cannot create output directory '" + opt_.out + "': " + ec.message());
  }

  void write(const std::string& file, const std::string& text) const {
    const auto path = std::filesystem::path(opt_.out) / file;
    std::ofstream os(path, std::ios::binary);
    os << text;
    if (!os) fail("io", "failed writing '" + path.string() + "'");
  }

  // Report body is deterministic; wall-clock data goes next to it.
  void finish(const json& report, std::optional<double> solve_seconds = std::nullopt) const {
    write(name_ + ".json", report.dump(1) + "\n");
    json meta;
    meta["subcommand"] = name_;
    meta["started_at"] = started_at_;
    meta["wall_seconds"] = std::chrono::duration<double>(Clock::now() - start_).count();
    if (solve_seconds) meta["solve_seconds"] = *solve_seconds;
    meta["library_version"] = mwcc_version();
    write(name_ + ".meta.json", meta.dump(1) + "\n");
  }

  void say(const std::string& line) const {
    if (!opt_.quiet) std::cout << line << "\n";
  }

 private:
  using Clock = std::chrono::steady_clock;
  static std::string now_iso() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
  }

  std::string name_;
  const Options& opt_;
  Clock::time_point start_;
  std::string started_at_ = now_iso();
};

ProblemPtr load(const Options& opt) {
  if (opt.problem.empty()) fail("invalid_argument", "a problem file is required");
  mwcc_problem* raw = nullptr;
  check(mwcc_problem_load(opt.problem.c_str(), &raw));
  ProblemPtr p(raw);
  if (opt.epsilon) {
    check(mwcc_problem_with_risk_bound(p.get(), *opt.epsilon, &raw));
    p.reset(raw);
  }
  return p;
}

PolicyPtr load_policy(const mwcc_problem* p, const Options& opt) {
  if (opt.policy.empty()) fail("invalid_argument", "--policy is required");
  mwcc_policy* raw = nullptr;
  check(mwcc_policy_load(p, opt.policy.c_str(), &raw));
  return PolicyPtr(raw);
}

mwcc_mode parse_mode(const std::string& m) {
  if (m == "joint") return MWCC_MODE_JOINT;
  if (m == "literal") return MWCC_MODE_LITERAL;
  fail("invalid_argument", "unknown mode '" + m + "'");
}

mwcc_budget budget(const Options& opt) {
  mwcc_budget b{1'000'000, 2'000'000};
  if (opt.rule_budget) b.max_rules_per_node = *opt.rule_budget;
  if (opt.budget) b.max_nodes = *opt.budget;
  return b;
}

json policy_json(const mwcc_problem* p, const mwcc_policy* pi) {
  char* s = nullptr;
  check(mwcc_policy_to_json(p, pi, &s));
  return json::parse(take(s));
}

std::string policy_text(const mwcc_problem* p, const mwcc_policy* pi) {
  char* s = nullptr;
  check(mwcc_policy_to_string(p, pi, &s));
  return take(s);
}

std::string policy_id(const mwcc_policy* pi) {
  char* s = nullptr;
  check(mwcc_policy_id(pi, &s));
  return take(s);
}

json rollout_json(const mwcc_rollout_summary& r, std::uint64_t seed) {
  return json{{"rollouts", r.rollouts},
              {"seed", seed},
              {"mean_cost", r.mean_cost},
              {"cost_std_error", r.cost_std_error},
              {"safety_fraction", r.safety_fraction},
              {"safety_std_error", r.safety_std_error}};
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

int cmd_eval_mwps(const Options& opt) {
  Run run("eval-mwps", opt);
  auto p = load(opt);
  auto pi = load_policy(p.get(), opt);
  double backward = 0, forward = 0, cost = 0;
  check(mwcc_mwps_backward(p.get(), pi.get(), &backward));
  check(mwcc_mwps_forward(p.get(), pi.get(), &forward));
  check(mwcc_expected_cost(p.get(), pi.get(), &cost));
  mwcc_estimate mc{};
  check(mwcc_monte_carlo_mwps(p.get(), pi.get(), opt.rollouts, opt.seed, &mc));
  char* csv = nullptr;
  check(mwcc_safety_table_csv(p.get(), pi.get(), &csv));
  run.write("safety-table.csv", take(csv));

  json r;
  r["schema_version"] = kSchemaVersion;
  r["policy"] = policy_json(p.get(), pi.get());
  r["mwps_backward"] = backward;
  r["mwps_forward"] = forward;
  r["expected_cost"] = cost;
  r["monte_carlo"] = {{"rollouts", mc.samples}, {"seed", opt.seed}, {"mean", mc.mean}, {"std_error", mc.std_error}};
  r["routes_agree"] = std::fabs(backward - forward) <= 1e-12;
  run.finish(r);
  run.say("mwps backward=" + fmt(backward) + " forward=" + fmt(forward) + " mc=" + fmt(mc.mean) + " +/- " +
          fmt(mc.std_error));
  return kExitOk;
}

int cmd_solve_penalty(const Options& opt) {
  Run run("solve-penalty", opt);
  if (opt.lambdas.size() != 1) fail("invalid_argument", "solve-penalty takes exactly one --lambda");
  auto p = load(opt);
  const double lambda = opt.lambdas.front();
  const double delta = opt.delta.value_or(-lambda);
  const mwcc_penalty zeta{MWCC_PENALTY_AFFINE, lambda, delta, 0.0};
  double value = 0;
  mwcc_policy* raw = nullptr;
  check(mwcc_solve_penalty(p.get(), &zeta, &value, &raw));
  PolicyPtr pi(raw);
  double cost = 0, mwps = 0;
  check(mwcc_expected_cost(p.get(), pi.get(), &cost));
  check(mwcc_mwps_backward(p.get(), pi.get(), &mwps));

  json r;
  r["schema_version"] = kSchemaVersion;
  r["lambda"] = lambda;
  r["delta"] = delta;
  r["objective"] = value;
  r["expected_cost"] = cost;
  r["mwps"] = mwps;
  r["policy_id"] = policy_id(pi.get());
  r["policy"] = policy_json(p.get(), pi.get());
  run.finish(r);
  run.say("objective=" + fmt(value) + " cost=" + fmt(cost) + " mwps=" + fmt(mwps) + " policy=" +
          policy_text(p.get(), pi.get()));
  return kExitOk;
}

int cmd_sweep_lambda(const Options& opt) {
  Run run("sweep-lambda", opt);
  if (opt.lambdas.empty()) fail("invalid_argument", "sweep-lambda needs at least one --lambda");
  auto p = load(opt);
  char* csv = nullptr;
  char* js = nullptr;
  const double* delta = opt.delta ? &*opt.delta : nullptr;
  check(mwcc_sweep_lambda(p.get(), opt.lambdas.data(), opt.lambdas.size(), delta, &csv, &js));
  const std::string table = take(csv);
  run.write("sweep-lambda.csv", table);
  run.finish(json::parse(take(js)));
  run.say(table.substr(0, table.size() - (table.empty() ? 0 : 1)));
  return kExitOk;
}

int cmd_solve_augmented(const Options& opt) {
  Run run("solve-augmented", opt);
  auto p = load(opt);
  const mwcc_budget b = budget(opt);
  mwcc_solve_report* raw = nullptr;
  check(mwcc_solve_augmented(p.get(), parse_mode(opt.mode), &b, &raw));
  ReportPtr report(raw);
  mwcc_report_summary s{};
  check(mwcc_report_summary_get(report.get(), &s));
  char* js = nullptr;
  check(mwcc_report_to_json(p.get(), report.get(), &js));
  const json r = json::parse(take(js));

  std::string csv = "stage,node,state,action\n";
  for (const auto& e : r["policy"])
    csv += std::to_string(e["stage"].get<int>()) + "," + std::to_string(e["node"].get<std::size_t>()) + "," +
           e["state"].get<std::string>() + "," + e["action"].get<std::string>() + "\n";
  run.write("solve-augmented-policy.csv", csv);
  run.finish(r, s.solve_seconds);
  if (!s.feasible) {
    run.say("verdict=infeasible risk_bound=" + fmt(s.risk_bound));
    return kExitInfeasible;
  }
  run.say("verdict=feasible value=" + fmt(s.value) + " closed_loop_mwps=" + fmt(s.closed_loop_mwps) +
          " nodes=" + std::to_string(s.total_nodes));
  return kExitOk;
}

int cmd_oracle(const Options& opt) {
  Run run("oracle", opt);
  auto p = load(opt);
  mwcc_oracle* raw = nullptr;
  check(mwcc_oracle_run(p.get(), opt.budget.value_or(10'000'000), &raw));
  OraclePtr o(raw);
  char* csv = nullptr;
  check(mwcc_oracle_to_csv(o.get(), &csv));
  run.write("oracle.csv", take(csv));
  std::uint64_t count = 0;
  check(mwcc_oracle_row_count(o.get(), &count));
  double eps = 0;
  check(mwcc_problem_risk_bound(p.get(), &eps));
  int feasible = 0;
  double cost = 0, mwps = 0;
  mwcc_policy* best = nullptr;
  check(mwcc_oracle_constrained(o.get(), &feasible, &cost, &mwps, &best));
  PolicyPtr pi(best);

  json r;
  r["schema_version"] = kSchemaVersion;
  r["policies"] = count;
  r["risk_bound"] = eps;
  r["verdict"] = feasible ? "feasible" : "infeasible";
  if (feasible) {
    r["constrained_best"] = {{"cost", cost},
                             {"mwps", mwps},
                             {"policy_id", policy_id(pi.get())},
                             {"policy", policy_json(p.get(), pi.get())}};
  } else {
    r["constrained_best"] = nullptr;
  }
  run.finish(r);
  if (!feasible) {
    run.say("verdict=infeasible policies=" + std::to_string(count));
    return kExitInfeasible;
  }
  run.say("verdict=feasible cost=" + fmt(cost) + " mwps=" + fmt(mwps) + " policy=" + policy_text(p.get(), pi.get()));
  return kExitOk;
}

int cmd_simulate(const Options& opt) {
  Run run("simulate", opt);
  auto p = load(opt);
  json r;
  r["schema_version"] = kSchemaVersion;
  mwcc_rollout_summary sum{};
  if (!opt.policy.empty()) {
    auto pi = load_policy(p.get(), opt);
    check(mwcc_simulate_policy(p.get(), pi.get(), opt.rollouts, opt.seed, &sum));
    r["controller"] = "markov";
    r["policy"] = policy_json(p.get(), pi.get());
  } else {
    const mwcc_budget b = budget(opt);
    mwcc_solve_report* raw = nullptr;
    check(mwcc_solve_augmented(p.get(), parse_mode(opt.mode), &b, &raw));
    ReportPtr report(raw);
    mwcc_report_summary s{};
    check(mwcc_report_summary_get(report.get(), &s));
    if (!s.feasible) {
      r["controller"] = opt.mode;
      r["verdict"] = "infeasible";
      run.finish(r);
      run.say("verdict=infeasible");
      return kExitInfeasible;
    }
    check(mwcc_report_simulate(p.get(), report.get(), opt.rollouts, opt.seed, &sum));
    r["controller"] = opt.mode;
    r["exact_cost"] = s.expected_cost;
    r["exact_mwps"] = s.closed_loop_mwps;
  }
  r["simulation"] = rollout_json(sum, opt.seed);
  run.finish(r);
  run.say("safety=" + fmt(sum.safety_fraction) + " +/- " + fmt(sum.safety_std_error) + " cost=" +
          fmt(sum.mean_cost) + " +/- " + fmt(sum.cost_std_error));
  return kExitOk;
}

json spec_json(const mwcc_continuous_spec& c) {
  return json{{"drift", c.drift},
              {"state_gain", c.state_gain},
              {"action_gain", c.action_gain},
              {"noise_std", c.noise_std},
              {"action_min", c.action_min},
              {"action_max", c.action_max},
              {"safe_lo", c.safe_lo},
              {"safe_hi", c.safe_hi},
              {"stage_state_weight", c.stage_state_weight},
              {"stage_action_weight", c.stage_action_weight},
              {"terminal_state_weight", c.terminal_state_weight},
              {"horizon", c.horizon},
              {"risk_bound", c.risk_bound},
              {"initial_value", c.initial_value}};
}

// discretize -> augmented solve -> exact closed-loop evaluation -> Monte Carlo
// on the continuous system, plus the unconstrained optimum for reference.
int cmd_casestudy(const Options& opt) {
  Run run("casestudy", opt);
  ProblemPtr p;
  json source;
  if (!opt.problem.empty()) {
    p = load(opt);
    int disc = 0;
    check(mwcc_problem_is_discretized(p.get(), &disc));
    if (!disc) fail("invalid_argument", "casestudy needs a problem with a \"continuous\" block");
    source = {{"problem", std::filesystem::path(opt.problem).filename().string()}};
  } else {
    mwcc_continuous_spec spec{};
    check(mwcc_casestudy_spec(opt.variant.c_str(), &spec));
    if (opt.epsilon) spec.risk_bound = *opt.epsilon;
    mwcc_problem* raw = nullptr;
    check(mwcc_problem_discretize(&spec, opt.grid_cells, opt.actions, &raw));
    p.reset(raw);
    source = {{"variant", opt.variant},
              {"continuous", spec_json(spec)},
              {"grid", {{"cells", opt.grid_cells}, {"actions", opt.actions}}}};
  }
  double eps = 0;
  check(mwcc_problem_risk_bound(p.get(), &eps));

  const mwcc_budget b = budget(opt);
  mwcc_solve_report* rraw = nullptr;
  check(mwcc_solve_augmented(p.get(), parse_mode(opt.mode), &b, &rraw));
  ReportPtr report(rraw);
  mwcc_report_summary s{};
  check(mwcc_report_summary_get(report.get(), &s));
  char* js = nullptr;
  check(mwcc_report_to_json(p.get(), report.get(), &js));

  // Cheapest Markov policy with no safety price.
  const mwcc_penalty free_zeta{MWCC_PENALTY_AFFINE, 0.0, 0.0, 0.0};
  double free_value = 0;
  mwcc_policy* fraw = nullptr;
  check(mwcc_solve_penalty(p.get(), &free_zeta, &free_value, &fraw));
  PolicyPtr free_pi(fraw);
  double free_mwps = 0;
  check(mwcc_mwps_backward(p.get(), free_pi.get(), &free_mwps));
  const bool unconstrained_violates = free_mwps < 1.0 - eps - 1e-12;

  json r;
  r["schema_version"] = kSchemaVersion;
  r["source"] = source;
  r["risk_bound"] = eps;
  r["mode"] = opt.mode;
  r["solve"] = json::parse(take(js));
  r["unconstrained"] = {{"cost", free_value},
                        {"mwps", free_mwps},
                        {"policy_id", policy_id(free_pi.get())},
                        {"violates_bound", unconstrained_violates}};
  r["constraint_active"] = unconstrained_violates;

  if (!s.feasible) {
    r["verdict"] = "infeasible";
    run.finish(r, s.solve_seconds);
    run.say("verdict=infeasible risk_bound=" + fmt(eps));
    return kExitInfeasible;
  }
  r["verdict"] = "feasible";

  mwcc_rollout_summary mc{};
  check(mwcc_report_simulate_continuous(p.get(), report.get(), opt.rollouts, opt.seed, &mc));
  const double exact = s.closed_loop_mwps_backward;
  const double sigma = std::sqrt(std::max(0.0, exact * (1.0 - exact)) / static_cast<double>(mc.rollouts));
  const double gap = std::fabs(mc.safety_fraction - exact);
  const bool mc_agrees = gap <= 3.0 * sigma;

  r["discretized_mwps"] = exact;
  r["expected_cost"] = s.expected_cost;
  r["monte_carlo"] = rollout_json(mc, opt.seed);
  r["monte_carlo"]["exact_sigma"] = sigma;
  r["monte_carlo"]["abs_gap"] = gap;
  r["monte_carlo"]["within_3_sigma"] = mc_agrees;
  r["checks"] = {{"mwps_meets_bound", exact >= 1.0 - eps - 1e-12},
                 {"mc_within_3_sigma", mc_agrees},
                 {"constraint_active", unconstrained_violates}};
  run.finish(r, s.solve_seconds);
  run.say("verdict=feasible value=" + fmt(s.value) + " mwps=" + fmt(exact) + " mc=" + fmt(mc.safety_fraction) +
          " (3 sigma " + fmt(3 * sigma) + ") unconstrained_mwps=" + fmt(free_mwps) +
          " constraint_active=" + (unconstrained_violates ? "yes" : "no"));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-horizon MDP solver under a mission-wide safety chance constraint"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mwcc_version());
  Options opt;

  auto problem_arg = [&](CLI::App* sub, bool required = true) {
    auto* o = sub->add_option("problem", opt.problem, "problem JSON file");
    if (required) o->required()->check(CLI::ExistingFile);
  };
  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", opt.out, "output directory (created if absent)")->capture_default_str();
    sub->add_option("--epsilon,--risk", opt.epsilon, "override the risk bound");
    sub->add_flag("--quiet", opt.quiet, "no summary on stdout");
  };
  auto sampling = [&](CLI::App* sub) {
    sub->add_option("--seed", opt.seed, "master seed")->capture_default_str();
    sub->add_option("--rollouts", opt.rollouts, "Monte Carlo rollouts")->capture_default_str();
  };
  auto solver = [&](CLI::App* sub) {
    sub->add_option("--mode", opt.mode, "F propagation: joint or literal")
        ->check(CLI::IsMember({"joint", "literal"}))
        ->capture_default_str();
    sub->add_option("--budget", opt.budget, "belief-tree node budget");
    sub->add_option("--rule-budget", opt.rule_budget, "decision rules per node budget");
  };

  auto* eval = app.add_subcommand("eval-mwps", "MWPS of a Markov policy by three routes");
  problem_arg(eval);
  common(eval);
  sampling(eval);
  eval->add_option("--policy", opt.policy, "policy JSON file")->required()->check(CLI::ExistingFile);

  auto* pen = app.add_subcommand("solve-penalty", "affine-penalty dynamic programming");
  problem_arg(pen);
  common(pen);
  pen->add_option("--lambda", opt.lambdas, "penalty slope")->required()->expected(1);
  pen->add_option("--delta", opt.delta, "penalty offset (default -lambda)");

  auto* sweep = app.add_subcommand("sweep-lambda", "affine-penalty solutions over a list of prices");
  problem_arg(sweep);
  common(sweep);
  sweep->add_option("--lambda", opt.lambdas, "penalty slopes")->required()->delimiter(',');
  sweep->add_option("--delta", opt.delta, "penalty offset (default -lambda per row)");

  auto* aug = app.add_subcommand("solve-augmented", "exact MWPS-constrained solve on the belief tree");
  problem_arg(aug);
  common(aug);
  solver(aug);

  auto* orc = app.add_subcommand("oracle", "brute-force enumeration of Markov policies");
  problem_arg(orc);
  common(orc);
  orc->add_option("--budget", opt.budget, "policy enumeration budget");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo rollouts of a policy or augmented solution");
  problem_arg(sim);
  common(sim);
  sampling(sim);
  solver(sim);
  sim->add_option("--policy", opt.policy, "Markov policy JSON (default: solve augmented)")
      ->check(CLI::ExistingFile);

  auto* cs = app.add_subcommand("casestudy", "packaged scalar-system pipeline");
  problem_arg(cs, false);
  common(cs);
  sampling(cs);
  solver(cs);
  cs->get_option("--mode")->default_str("literal");
  cs->add_option("--variant", opt.variant, "nominal or risk-active")
      ->check(CLI::IsMember({"nominal", "risk-active"}))
      ->capture_default_str();
  cs->add_option("--grid-cells", opt.grid_cells, "state cells")->capture_default_str();
  cs->add_option("--actions", opt.actions, "action grid points")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  // Joint propagation enumerates |A|^|support| rules per node, hopeless on the
  // 401-cell grid; the case study defaults to the literal reading.
  if (cs->parsed() && cs->count("--mode") == 0) opt.mode = "literal";

  try {
    if (eval->parsed()) return cmd_eval_mwps(opt);
    if (pen->parsed()) return cmd_solve_penalty(opt);
    if (sweep->parsed()) return cmd_sweep_lambda(opt);
    if (aug->parsed()) return cmd_solve_augmented(opt);
    if (orc->parsed()) return cmd_oracle(opt);
    if (sim->parsed()) return cmd_simulate(opt);
    if (cs->parsed()) return cmd_casestudy(opt);
  } catch (const Failure& f) {
    std::cerr << "mwcc: error[" << f.code << "]: " << f.message << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "mwcc: error[internal]: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
