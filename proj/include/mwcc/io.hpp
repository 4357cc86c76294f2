#pragma once

// File formats: the JSON problem schema (docs/problem-schema.md), policy
// files, and the JSON/CSV tables emitted by the command-line tool.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mwcc/augmented.hpp"
#include "mwcc/model.hpp"
#include "mwcc/oracle.hpp"
#include "mwcc/penalty.hpp"
#include "mwcc/safety.hpp"

namespace mwcc {

inline constexpr int kSchemaVersion = 1;

/// Parses a problem document. Tabular documents go through build_problem,
/// documents with a "continuous" block through discretize. Unknown keys are
/// rejected; syntax errors report line and column.
Problem parse_problem(std::string_view json_text);
Problem load_problem(const std::string& path);

/// Tabular JSON form of any problem (discretized ones included). Reloading it
/// reproduces the kernel and cost arrays bit for bit.
std::string problem_to_json(const Problem& p);

Policy parse_policy(const Problem& p, std::string_view json_text);
Policy load_policy(const Problem& p, const std::string& path);
std::string policy_to_json(const Problem& p, const Policy& pi);

std::string safety_table_csv(const Problem& p, const SafetyValueTable& table);
std::string safety_table_json(const Problem& p, const SafetyValueTable& table);

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string sweep_json(const Problem& p, const std::vector<SweepRow>& rows);

/// One line per policy: policy, cost, mwps, feasible.
std::string oracle_csv(const Problem& p, const OracleResult& result);

/// Deterministic report body (no timing).
std::string solve_report_json(const Problem& p, const SolveReport& report);

/// Compact text form of a Markov policy: rules joined by '|', actions within
/// a rule by ','.
std::string policy_string(const Problem& p, const Policy& pi);

/// Packaged case-study systems: "nominal" (sigma 0.01, s0 0.5) and
/// "risk-active" (sigma 0.05, s0 0.9).
std::optional<ContinuousSpec> casestudy_spec(std::string_view variant);

std::string format_double(double x);

void write_text_file(const std::string& path, std::string_view text);
std::string read_text_file(const std::string& path);

}  // namespace mwcc
