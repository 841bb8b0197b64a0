#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <initializer_list>
#include <regex>
#include <string>

#include "weightsmith/harness.hpp"
#include "weightsmith/serialize.hpp"

using namespace weightsmith;

namespace {

int failures = 0;

void line(int id, const char* what, bool pass, double seconds, double limit, const std::string& detail) {
  const bool ok = pass && seconds < limit;
  if (!ok) ++failures;
  std::printf("[%s] %2d %-34s %7.3fs (limit %4.0fs)  %s\n", ok ? "PASS" : "FAIL", id, what, seconds, limit, detail.c_str());
}

// all named reports pass; returns their summed wall time
bool collect(const SuiteResult& res, std::initializer_list<const char*> blocks, double& seconds, std::string& detail) {
  bool pass = true;
  seconds = 0;
  for (const char* b : blocks) {
    const VerificationReport* r = res.find(b);
    if (!r) {
      detail += std::string(b) + "=missing ";
      pass = false;
      continue;
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s=%.2e/%.2e ", b, r->max_error, r->budget);
    detail += buf;
    pass = pass && r->pass;
    seconds += r->wall_time_s;
  }
  return pass;
}

void criterion(int id, const char* what, const SuiteResult& res, std::initializer_list<const char*> blocks, double limit) {
  double s = 0;
  std::string detail;
  const bool pass = collect(res, blocks, s, detail);
  line(id, what, pass, s, limit, detail);
}

std::string strip_times(const std::string& text) {
  static const std::regex wall("\"wall_time_s\": \"[^\"]*\"");
  return std::regex_replace(text, wall, "\"wall_time_s\": \"\"");
}

}  // namespace

int main() {
  HarnessConfig cfg;
  cfg.epsilon = 1e-6;

  const SuiteResult copy = run_suite("copy", cfg);
  criterion(1, "copy block", copy, {"copy", "copy_lambda_doubling"}, 5);
  criterion(2, "adder, exhaustive d <= 6", run_suite("adder", cfg), {"adder"}, 1);
  criterion(3, "matmul block and slope", run_suite("matmul", cfg), {"matmul", "matmul_slope"}, 10);
  criterion(4, "transpose block", run_suite("transpose", cfg),
            {"transpose", "transpose_encodings", "transpose_double"}, 10);
  criterion(5, "sigmoid block and fit", run_suite("sigmoid", cfg),
            {"sigmoid", "sigmoid_indicator_swap", "sigmoid_fit_sin"}, 30);
  const SuiteResult filter = run_suite("filter", cfg);
  criterion(6, "bit filter and bit creation", filter, {"bit_filter_clean", "bit_filter_perturbed", "bit_creation"}, 1);
  criterion(7, "filtering transformer", filter, {"filtering", "filtering_irrelevance"}, 20);
  criterion(8, "end-to-end chain of thought", run_suite("cot", cfg),
            {"cot_mlp", "cot_trace", "cot_deep_linear", "cot_deep_linear_norms"}, 30);
  criterion(9, "subspace filter", filter, {"subspace_mass", "subspace_mean"}, 2);

  // the CLI, twice, with the same seed
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "weightsmith_acceptance";
  fs::remove_all(root);
  bool pass = true;
  double worst = 0;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("\"") + WEIGHTSMITH_CLI + "\" verify --suite all --epsilon 1e-6 --out \"" +
                            (root / run).string() + "\" > \"" + (root.string() + run) + ".log\" 2>&1";
    const auto t0 = std::chrono::steady_clock::now();
    const int status = std::system(cmd.c_str());
    worst = std::max(worst, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    pass = pass && status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0;
  }
  std::size_t compared = 0;
  for (const auto& name : suite_names()) {
    const fs::path a = root / "a" / (name + ".json"), b = root / "b" / (name + ".json");
    if (!fs::exists(a) || !fs::exists(b)) {
      pass = false;
      continue;
    }
    pass = pass && strip_times(read_file(a.string())) == strip_times(read_file(b.string()));
    ++compared;
  }
  line(10, "verify --suite all, deterministic", pass, worst, 60,
       std::to_string(compared) + " reports identical across runs");

  std::printf("%s\n", failures == 0 ? "acceptance: all criteria met" : "acceptance: FAILED");
  return failures == 0 ? 0 : 1;
}
