#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "CLI11.hpp"
#include "weightsmith/cot.hpp"
#include "weightsmith/harness.hpp"
#include "weightsmith/linalg.hpp"
#include "weightsmith/primitives.hpp"
#include "weightsmith/serialize.hpp"

using namespace weightsmith;

namespace {

constexpr int kUsage = 2;

int usage_error(const CLI::App& app, const std::string& msg) {
  std::cerr << "error: " << msg << "\n\n" << app.help();
  return kUsage;
}

int verify(const CLI::App& cmd, std::vector<std::string> suites, HarnessConfig cfg) {
  cfg = apply_environment(cfg);
  for (const auto& s : suites)
    if (s != "all" && !is_suite(s)) {
      std::string known = "all";
      for (const auto& n : suite_names()) known += " | " + n;
      return usage_error(cmd, "unknown suite '" + s + "' (expected " + known + ")");
    }
  validate_config(cfg);
  const auto results = run_suites(suites, cfg);
  write_suite_reports(results, cfg);
  bool ok = true;
  for (const auto& res : results) {
    for (const auto& r : res.reports)
      std::printf("%-8s %-24s %s  cases=%-6zu max_error=%.3e budget=%.3e  %.3fs\n", res.suite.c_str(), r.block.c_str(),
                  r.pass ? "PASS" : "FAIL", r.cases, r.max_error, r.budget, r.wall_time_s);
    ok = ok && res.pass;
  }
  std::printf("%s (seed %llu, reports in %s)\n", ok ? "all suites passed" : "some suites FAILED",
              static_cast<unsigned long long>(cfg.seed), cfg.out_dir.c_str());
  return ok ? 0 : 1;
}

struct DemoArgs {
  Eigen::Index L = 2, d = 4, k = 3, n = 20;
  double alpha = 0.5, eps = 1e-3;
  std::uint64_t seed = 42;
  std::string out_dir = "reports";
};

int demo_cot(DemoArgs a) {
  HarnessConfig env;
  env.seed = a.seed;
  a.seed = apply_environment(env).seed;
  std::mt19937_64 rng(a.seed);
  const MlpTask task = random_mlp_task(mlp_dims(a.L, a.d, a.k), LeakyAlpha{a.alpha}, rng);
  const CotInstance inst = generate_instance(task, a.n, rng);
  CotConfig cfg;
  cfg.epsilon = a.eps;
  CotResult res;
  try {
    res = run_cot(task, inst, cfg);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::UnderdeterminedLayer) throw;
    std::cerr << e.what() << "\n";
    return 1;
  }
  std::filesystem::create_directories(a.out_dir);
  const auto csv = std::filesystem::path(a.out_dir) / "cot_trace.csv";
  std::ofstream os(csv);
  write_trace_csv(os, res.trace);
  require(static_cast<bool>(os), ErrorKind::InvalidInput, "cannot write " + csv.string());

  const ConditionProfile prof = condition_profile(task, inst.prompt);
  std::printf("task: L=%lld d=%lld k=%lld alpha=%g, n=%lld samples, seed %llu\n", static_cast<long long>(a.L),
              static_cast<long long>(a.d), static_cast<long long>(a.k), a.alpha, static_cast<long long>(a.n),
              static_cast<unsigned long long>(a.seed));
  std::printf("kappa_max=%.4g, target eps=%g\n", prof.kappa_max, a.eps);
  std::printf("%4s %12s %12s %12s %s\n", "ell", "step_error", "cumulative", "bound", "");
  for (const auto& e : res.trace)
    std::printf("%4lld %12.4e %12.4e %12.4e %s\n", static_cast<long long>(e.ell), e.step_error, e.cumulative_error,
                e.bound, e.pass ? "ok" : "OVER");
  std::printf("final error %.4e (%s), trace in %s\n", res.final_error, res.pass ? "pass" : "FAIL", csv.string().c_str());
  return res.pass ? 0 : 1;
}

struct BuildArgs {
  std::string block;
  Eigen::Index d = 2, k = 2, m = 2, n = 2, L = 2, n_max = 8;
  std::string out = "-";
  std::string input_out;
  std::uint64_t seed = 42;
};

void emit(const std::string& path, const std::string& text) {
  if (path == "-")
    std::cout << text;
  else
    write_file(path, text);
}

int build(const CLI::App& cmd, const BuildArgs& a) {
  std::mt19937_64 rng(a.seed);
  std::uniform_real_distribution<double> u(-1, 1);
  auto rand = [&](Eigen::Index r, Eigen::Index c) { return Matrix::NullaryExpr(r, c, [&] { return u(rng); }).eval(); };
  FunctionBlock blk;
  Matrix input;
  if (a.block == "adder") {
    blk = build_adder_network(a.d);
    const std::uint64_t top = (std::uint64_t{1} << a.d) - 1;
    input = adder_input({{top, 1}, {top / 2, top / 3}}, a.d);
  } else if (a.block == "transpose") {
    blk = build_transpose_block(a.d);
    input = transpose_input(TransposeLayout::make(a.d), rand(a.d, a.d));
  } else if (a.block == "matmul") {
    const LinearizationConfig lc;
    const auto l = MatmulLayout::make(a.k, a.m, a.n, lc.denom_block);
    blk = build_matmul_block(l, lc);
    input = matmul_input(l, rand(a.k, a.m), rand(a.k, a.n));
  } else if (a.block == "filter") {
    blk = build_filtering_transformer(a.L, a.d, a.n_max, {});
    CotPrompt p;
    p.test.push_back(rand(a.d, 1));
    // as many sample chains as fit, at most three
    for (Eigen::Index i = 0; i < 3; ++i) {
      std::vector<Vector> chain;
      for (Eigen::Index s = 0; s <= a.L; ++s) chain.push_back(rand(a.d, 1));
      p.chains.push_back(chain);
      if (prompt_tokens(p, 1) > a.n_max) {
        p.chains.pop_back();
        break;
      }
    }
    require(!p.chains.empty(), ErrorKind::CapacityError, "--n-max too small for one chain");
    input = assemble_cot_input(p, 1, PromptLayout::make(a.d, a.n_max));
  } else if (a.block == "bit-creation") {
    blk = build_bit_creation_layer(1, {0}, IndicatorShape::Plateau);
    input = Matrix(1, 5);
    input << -2, -1, 0, 1, 2;
  } else {
    return usage_error(cmd, "unknown block '" + a.block + "' (expected adder | transpose | matmul | filter | bit-creation)");
  }
  emit(a.out, to_json(blk));
  if (!a.input_out.empty()) emit(a.input_out, to_json(input));
  return 0;
}

int eval(const std::string& block_path, const std::string& input_path, const std::string& out) {
  const FunctionBlock blk = block_from_json(read_file(block_path));
  const Matrix x = matrix_from_json(read_file(input_path));
  emit(out, to_json(block_forward(blk, x)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weightsmith: hand-built transformer blocks and their verification"};
  app.require_subcommand(1);

  HarnessConfig hcfg;
  std::vector<std::string> suites{"all"};
  auto* verify_cmd = app.add_subcommand("verify", "run verification suites and write JSON reports");
  verify_cmd->add_option("--suite", suites, "copy | adder | transpose | matmul | sigmoid | filter | cot | all")
      ->delimiter(',');
  verify_cmd->add_option("--epsilon", hcfg.epsilon, "copy and transpose error target")->capture_default_str();
  verify_cmd->add_option("--seed", hcfg.seed, "RNG seed (WEIGHTSMITH_SEED overrides)")->capture_default_str();
  verify_cmd->add_option("--out", hcfg.out_dir, "report directory")->capture_default_str();
  verify_cmd->add_option("--C-filter", hcfg.C_filter, "bit filter constant")->capture_default_str();
  verify_cmd->add_option("--score-scale", hcfg.score_scale, "matmul score scale")->capture_default_str();
  verify_cmd->add_option("--n-max", hcfg.n_max, "token capacity for copy")->capture_default_str();
  verify_cmd->add_option("--lambda", hcfg.lambda, "copy temperature (0 derives it from epsilon)")->capture_default_str();
  verify_cmd->add_option("--delta", hcfg.delta, "filtering tolerance")->capture_default_str();
  verify_cmd->add_option("--cot-epsilon", hcfg.cot_epsilon, "end-to-end CoT target")->capture_default_str();
  verify_cmd->add_flag("--parallel", hcfg.parallel, "run suites concurrently");

  DemoArgs demo;
  auto* demo_cmd = app.add_subcommand("demo-cot", "learn a random MLP through chain-of-thought and print the error trace");
  demo_cmd->add_option("-L,--layers", demo.L, "MLP depth")->capture_default_str();
  demo_cmd->add_option("-d,--dim", demo.d, "input dimension")->capture_default_str();
  demo_cmd->add_option("-k,--hidden", demo.k, "hidden width")->capture_default_str();
  demo_cmd->add_option("-n,--samples", demo.n, "in-context examples")->capture_default_str();
  demo_cmd->add_option("--alpha", demo.alpha, "leaky ReLU slope")->capture_default_str();
  demo_cmd->add_option("--eps", demo.eps, "target accuracy")->capture_default_str();
  demo_cmd->add_option("--seed", demo.seed, "RNG seed (WEIGHTSMITH_SEED overrides)")->capture_default_str();
  demo_cmd->add_option("--out", demo.out_dir, "directory for cot_trace.csv")->capture_default_str();

  BuildArgs b;
  auto* build_cmd = app.add_subcommand("build", "serialize a named block as JSON");
  build_cmd->add_option("block", b.block, "adder | transpose | matmul | filter | bit-creation")->required();
  build_cmd->add_option("--d", b.d, "bit width, matrix size or data dimension")->capture_default_str();
  build_cmd->add_option("--k", b.k, "matmul inner dimension")->capture_default_str();
  build_cmd->add_option("--m", b.m, "matmul columns of A")->capture_default_str();
  build_cmd->add_option("--n", b.n, "matmul columns of B")->capture_default_str();
  build_cmd->add_option("--L", b.L, "filter chain depth")->capture_default_str();
  build_cmd->add_option("--n-max", b.n_max, "filter token capacity")->capture_default_str();
  build_cmd->add_option("--out", b.out, "output file, - for stdout")->capture_default_str();
  build_cmd->add_option("--input-out", b.input_out, "also write a sample input matrix here");
  build_cmd->add_option("--seed", b.seed, "seed for the sample input")->capture_default_str();

  std::string block_path, input_path, eval_out = "-";
  auto* eval_cmd = app.add_subcommand("eval", "run a serialized block on a serialized input matrix");
  eval_cmd->add_option("--block", block_path, "block JSON")->required();
  eval_cmd->add_option("--input", input_path, "input matrix JSON")->required();
  eval_cmd->add_option("--out", eval_out, "output file, - for stdout")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*verify_cmd) return verify(*verify_cmd, suites, hcfg);
    if (*demo_cmd) return demo_cot(demo);
    if (*build_cmd) return build(*build_cmd, b);
    if (*eval_cmd) return eval(block_path, input_path, eval_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsage;
}
