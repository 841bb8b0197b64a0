#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "weightsmith/transformer.hpp"

namespace weightsmith {

struct HarnessConfig {
  std::uint64_t seed = 42;
  // copy read/write target
  double epsilon = 1e-6;
  double C_filter = 1e6;
  double score_scale = 1e-3;
  Eigen::Index n_max = 16;
  // 0 picks lambda from epsilon
  double lambda = 0.0;
  // filtering transformer error
  double delta = 1e-4;
  // end-to-end CoT accuracy
  double cot_epsilon = 1e-3;
  std::string out_dir = "reports";
  bool parallel = false;
};

/// Throws InvalidInput on non-positive settings.
void validate_config(const HarnessConfig& cfg);

/// WEIGHTSMITH_SEED, when set, replaces cfg.seed.
HarnessConfig apply_environment(HarnessConfig cfg);

/// copy, adder, transpose, matmul, sigmoid, filter, cot
const std::vector<std::string>& suite_names();
bool is_suite(const std::string& name);

struct SuiteResult {
  std::string suite;
  std::vector<VerificationReport> reports;
  bool pass = true;
  double wall_time_s = 0;

  const VerificationReport* find(const std::string& block) const;
};

/// Unknown suite -> InvalidInput.
SuiteResult run_suite(const std::string& name, const HarnessConfig& cfg);

/// "all" expands to every suite. Runs concurrently when cfg.parallel.
std::vector<SuiteResult> run_suites(const std::vector<std::string>& names, const HarnessConfig& cfg);

std::string suite_report_json(const SuiteResult& result, const HarnessConfig& cfg);

/// Writes <out_dir>/<suite>.json for each result, creating out_dir.
void write_suite_reports(const std::vector<SuiteResult>& results, const HarnessConfig& cfg);

}  // namespace weightsmith
