// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
// Criteria 6 and 7 drive the installed command-line tool (MWCC_CLI).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "mwcc/augmented.hpp"
#include "mwcc/io.hpp"
#include "mwcc/oracle.hpp"
#include "mwcc/penalty.hpp"
#include "mwcc/safety.hpp"
#include "support/fixtures.hpp"

using namespace mwcc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kRouteTol = 1e-12;
constexpr double kValueTol = 1e-9;
constexpr double kUniqueMargin = 1e-9;
constexpr double kCertificateSlack = 1e-9;
constexpr double kTableTol = 1e-12;
constexpr double kRouteSeconds = 10.0;
constexpr double kPenaltySeconds = 30.0;
constexpr double kConstrainedSeconds = 60.0;
constexpr double kCaseStudySeconds = 300.0;

// Instances small enough for exhaustive policy enumeration.
const fixtures::Sizes kTiny{4, 3, 3};

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

void criterion_routes() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto d = fixtures::random_data(rng, {6, 3, 4}, t % 3 == 0);
    const Problem p = build_problem(d);
    const Policy pi = fixtures::random_policy(rng, p);
    const double back = mwps_backward(p, pi).at_initial(p);
    const double fwd = mwps_forward(p, pi);
    const double naive = fixtures::naive_stats(d, pi).mwps;
    worst = std::max({worst, std::fabs(back - fwd), std::fabs(back - naive), std::fabs(fwd - naive)});
  }
  const double secs = seconds_since(t0);
  report(1, worst <= kRouteTol && secs < kRouteSeconds,
         "200 instances, max route gap " + fmt(worst) + " (tol 1e-12), " + fmt(secs) + " s");
}

void criterion_penalty() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2002);
  double worst = 0.0;
  int unique = 0, matched = 0;
  for (int t = 0; t < 100; ++t) {
    const auto d = fixtures::random_data(rng, kTiny, t % 4 == 0);
    const Problem p = build_problem(d);
    const double slope = fixtures::uniform(rng, -20.0, 5.0);
    const double offset = t % 2 ? -slope : fixtures::uniform(rng, -5.0, 5.0);
    const AffinePenalty zeta{slope, offset};
    const auto sol = solve_affine_penalty(p, slope, offset);
    const auto oracle = brute_force_constrained(p);
    const OracleRow& best = oracle.penalized_best(zeta);
    const double best_value = best.cost + apply_penalty(zeta, best.mwps);
    worst = std::max(worst, std::fabs(sol.value - best_value));
    // Policies that act identically wherever they can be reached tie exactly;
    // uniqueness is judged among behaviourally distinct ones.
    const Policy best_pi = policy_at(p, best.index);
    double runner_up = kInfeasible;
    for (const auto& row : oracle.rows) {
      const double v = row.cost + apply_penalty(zeta, row.mwps);
      if (v < runner_up && !fixtures::same_on_reachable(p, policy_at(p, row.index), best_pi)) runner_up = v;
    }
    if (runner_up - best_value > kUniqueMargin) {
      ++unique;
      if (fixtures::same_on_reachable(p, sol.policy, best_pi)) ++matched;
    }
  }
  const double secs = seconds_since(t0);
  report(2, worst <= kValueTol && matched == unique && secs < kPenaltySeconds,
         "100 instances, max value gap " + fmt(worst) + " (tol 1e-9), policy match " + std::to_string(matched) +
             "/" + std::to_string(unique) + " unique optima, " + fmt(secs) + " s");
}

void criterion_constrained() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(3003);
  double worst = 0.0, worst_cert = 1.0;
  int verdict_mismatch = 0, feasible = 0, cert_fail = 0;
  for (int t = 0; t < 100; ++t) {
    auto d = fixtures::random_data(rng, kTiny, t % 4 == 0);
    d.risk_bound = t % 10 == 0 ? 0.0 : fixtures::uniform(rng, 0.0, 1.0);
    const Problem p = build_problem(d);
    const auto r = solve_augmented(p, PropagationMode::joint);
    const auto oracle = brute_force_constrained(p);
    if (r.feasible != oracle.constrained_best.has_value()) {
      ++verdict_mismatch;
      continue;
    }
    if (!r.feasible) continue;
    ++feasible;
    worst = std::max(worst, std::fabs(r.value - oracle.rows[*oracle.constrained_best].cost));
    const double margin = r.closed_loop_mwps - (1.0 - p.risk_bound());
    worst_cert = std::min(worst_cert, margin);
    if (margin < -kCertificateSlack) ++cert_fail;
  }
  const double secs = seconds_since(t0);
  report(3, verdict_mismatch == 0 && worst <= kValueTol && cert_fail == 0 && secs < kConstrainedSeconds,
         "100 instances (" + std::to_string(feasible) + " feasible), verdict mismatches " +
             std::to_string(verdict_mismatch) + ", max value gap " + fmt(worst) +
             " (tol 1e-9), min closed-loop margin " + fmt(worst_cert) + ", " + fmt(secs) + " s");
}

void criterion_commutation() {
  std::mt19937_64 rng(4004);
  int commuting = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = fixtures::pick(rng, 1, 8);
    std::vector<ScenarioOutcome> sc(n);
    double total = 0.0;
    for (auto& o : sc) {
      o.value = fixtures::uniform(rng, 0.0, 1.0);
      o.probability = fixtures::uniform(rng, 0.01, 1.0);
      total += o.probability;
    }
    for (auto& o : sc) o.probability /= total;
    const AffinePenalty zeta{fixtures::uniform(rng, -100.0, 100.0), fixtures::uniform(rng, -100.0, 100.0)};
    if (check_commutation(zeta, sc).commutes) ++commuting;
  }
  const ScenarioOutcome counter[] = {{0.8, 0.5}, {1.0, 0.5}};
  const auto exact = check_commutation(ExactPenalty{0.1}, counter);
  const bool ok = commuting == 1000 && !exact.commutes && exact.lhs == 0.0 && std::isinf(exact.rhs);
  report(4, ok,
         "affine commutes " + std::to_string(commuting) + "/1000; exact penalty on {0.8, 1.0}: lhs " +
             fmt(exact.lhs) + ", rhs " + fmt(exact.rhs));
}

std::uint64_t index_of(const Problem& p, const Policy& pi) {
  std::uint64_t i = 0;
  while (!(policy_at(p, i) == pi)) ++i;
  return i;
}

void criterion_gap() {
  const Problem p = load_problem(std::string(MWCC_REPO_DATA_DIR) + "/chain-v1.json");
  const auto rows = sweep_lambda(p, {-12.0, -10.0});
  const auto oracle = brute_force_constrained(p);
  bool ok = rows.size() == 2 && oracle.constrained_best.has_value();
  std::string detail;
  for (const auto& row : rows) {
    const AffinePenalty zeta{row.lambda, row.delta};
    const OracleRow& best = oracle.penalized_best(zeta);
    const OracleRow& own = oracle.rows[index_of(p, row.policy)];
    ok = ok && best.index == own.index && std::fabs(own.cost - row.cost) <= kTableTol &&
         std::fabs(own.mwps - row.mwps) <= kTableTol;
    detail += "price " + fmt(-row.lambda) + " -> " + policy_string(p, row.policy) + " cost " + fmt(row.cost) +
              " mwps " + fmt(row.mwps) + "; ";
  }
  if (ok) {
    const auto& price12 = rows[0];
    const auto& price10 = rows[1];
    const auto& constrained = oracle.rows[*oracle.constrained_best];
    ok = std::fabs(price10.mwps - 0.81) <= kTableTol && price10.mwps < 1.0 - p.risk_bound() &&
         std::fabs(price12.cost - 0.9) <= kTableTol && std::fabs(price12.mwps - 0.891) <= kTableTol &&
         policy_at(p, constrained.index) == price12.policy;
  }
  report(5, ok, detail + "oracle constrained optimum cost 0.9");
}

struct CliRun {
  int code = -1;
  double seconds = 0.0;
  json doc;
  std::string bytes;
};

CliRun run_casestudy(const std::string& variant, const fs::path& out, const char* threads) {
  std::ostringstream cmd;
  cmd << "MWCC_THREADS=" << threads << " '" << MWCC_CLI << "' casestudy --variant " << variant << " --out '"
      << out.string() << "' --quiet";
  CliRun r;
  const auto t0 = std::chrono::steady_clock::now();
  const int status = std::system(cmd.str().c_str());
  r.seconds = seconds_since(t0);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  const fs::path file = out / "casestudy.json";
  if (fs::exists(file)) {
    r.bytes = read_text_file(file.string());
    r.doc = json::parse(r.bytes);
  }
  return r;
}

void criterion_casestudy_and_determinism() {
  const fs::path work = fs::temp_directory_path() / ("mwcc-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(work);
  const CliRun nominal = run_casestudy("nominal", work / "nominal", "1");
  const CliRun active = run_casestudy("risk-active", work / "active", "1");

  bool ok6 = nominal.code == 0 && active.code == 0 && nominal.seconds < kCaseStudySeconds &&
             active.seconds < kCaseStudySeconds;
  std::string detail;
  if (ok6) {
    const json& mc = nominal.doc["monte_carlo"];
    const double p = nominal.doc["discretized_mwps"].get<double>();
    const double n = mc["rollouts"].get<double>();
    const double sigma = std::sqrt(p * (1.0 - p) / n);
    const double gap = std::fabs(mc["safety_fraction"].get<double>() - p);
    const bool nominal_ok = nominal.doc["source"]["grid"]["cells"] == 401 && nominal.doc["source"]["grid"]["actions"] == 21 &&
                          p >= 0.9 && gap <= 3.0 * sigma && n == 100000;
    const double q = active.doc["discretized_mwps"].get<double>();
    const double unconstrained = active.doc["unconstrained"]["mwps"].get<double>();
    const bool active_ok = q >= 0.9 && q < 1.0 && unconstrained < 1.0 - active.doc["risk_bound"].get<double>() &&
                           active.doc["constraint_active"] == true;
    ok6 = nominal_ok && active_ok;
    detail = "nominal: mwps " + fmt(p) + ", MC " + fmt(mc["safety_fraction"].get<double>()) + " (3 sigma " +
             fmt(3.0 * sigma) + "), " + fmt(nominal.seconds) + " s; risk-active: mwps " + fmt(q) +
             ", unconstrained mwps " + fmt(unconstrained) + ", " + fmt(active.seconds) + " s";
    const json& amc = active.doc["monte_carlo"];
    std::printf("INFO risk-active continuous MC %s vs discretized %s, gap %s, 3 sigma %s\n",
                fmt(amc["safety_fraction"].get<double>()).c_str(), fmt(q).c_str(),
                fmt(amc["abs_gap"].get<double>()).c_str(), fmt(3.0 * amc["exact_sigma"].get<double>()).c_str());
  } else {
    detail = "casestudy exit codes " + std::to_string(nominal.code) + "/" + std::to_string(active.code);
  }
  report(6, ok6, detail);

  // Fixed seeds, different worker counts: reports must match byte for byte.
  const CliRun nominal2 = run_casestudy("nominal", work / "nominal2", "3");
  const CliRun active2 = run_casestudy("risk-active", work / "active2", "3");
  bool ok7 = !nominal.bytes.empty() && nominal.bytes == nominal2.bytes && !active.bytes.empty() &&
             active.bytes == active2.bytes;
  const Problem chain = load_problem(std::string(MWCC_REPO_DATA_DIR) + "/chain-v1.json");
  const auto a = solve_augmented(chain, PropagationMode::literal);
  const auto b = solve_augmented(chain, PropagationMode::literal);
  ok7 = ok7 && solve_report_json(chain, a) == solve_report_json(chain, b);
  report(7, ok7, "casestudy reports identical across reruns (1 vs 3 workers), solve reports identical");
  fs::remove_all(work);
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria = {criterion_routes, criterion_penalty, criterion_constrained,
                                                       criterion_commutation, criterion_gap,
                                                       criterion_casestudy_and_determinism};
  for (const auto& c : criteria) {
    try {
      c();
    } catch (const std::exception& e) {
      std::printf("FAIL criterion: uncaught %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%s\n", failures == 0 ? "ALL PASS" : "SOME FAILED");
  return failures == 0 ? 0 : 1;
}
