#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "pnpmm/experiment.hpp"
#include "pnpmm/io.hpp"

using namespace pnpmm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "pnpmm_experiment_tests" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ExperimentConfig small_deblur(const fs::path& out) {
  ExperimentConfig c;
  c.problem = ProblemKind::Deblur;
  c.kernel_size = 5;
  c.kernel_sigma = 1.0;
  c.phantom_size = 24;
  c.zeta = 5.0;
  c.seed = 17;
  c.solver = SolverKind::PnpMm;
  c.regularizer = RegularizerKind::SmoothedTv;
  c.tv_epsilon = 0.5;
  c.solver_config.tau = 0.1;
  c.solver_config.lambda = 0.2;
  c.solver_config.iterations = 60;
  c.output_dir = out.string();
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PNPMM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Experiment, IdentityNoiselessMlemIsExact) {
  ExperimentConfig c;
  c.problem = ProblemKind::Identity;
  c.noiseless = true;
  c.solver = SolverKind::Mlem;
  c.regularizer = RegularizerKind::None;
  c.phantom_size = 16;
  c.solver_config.iterations = 3;
  const ExperimentSummary s = run_pipeline(c);
  EXPECT_EQ(s.psnr, kPsnrIdentical);
  EXPECT_EQ(s.image.values, s.truth.values);
}

TEST(Experiment, DeblurPnpMmMonotone) {
  const ExperimentSummary s = run_pipeline(small_deblur(scratch("mono")));
  EXPECT_TRUE(s.result.certified);
  EXPECT_TRUE(s.monotone);
  EXPECT_EQ(s.rate, RateCheck::Pass);
  EXPECT_GE(s.result.min_iterate_value, 0.0);
}

TEST(Experiment, WritesArtifactsDeterministically) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  auto ca = small_deblur(a), cb = small_deblur(b);
  ca.final_denoise = cb.final_denoise = true;
  run_experiment(ca);
  run_experiment(cb);
  for (const char* f : {"reconstruction.fras", "reconstruction.pgm", "denoised.fras", "trace.csv", "metrics.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto trace = read_trace_csv(a / "trace.csv");
  EXPECT_EQ(trace.records.size(), 60u);
  EXPECT_TRUE(slurp(a / "metrics.csv").starts_with("metric,value,note\npsnr,"));
}

TEST(Experiment, ShiftedPoissonWritesLastIterate) {
  const fs::path out = scratch("shifted");
  auto c = small_deblur(out);
  c.gauss_sigma = 0.05;
  const ExperimentSummary s = run_experiment(c);
  EXPECT_DOUBLE_EQ(s.result.config.background, (5.0 * 0.05) * (5.0 * 0.05));
  EXPECT_TRUE(fs::exists(out / "last_iterate.fras"));
  EXPECT_TRUE(s.monotone);
}

TEST(Experiment, ValidationErrors) {
  ExperimentConfig c;
  c.solver = SolverKind::Mlem;  // default regularizer is smoothed_tv
  EXPECT_THROW(c.validate(), Error);
  c.regularizer = RegularizerKind::None;
  c.zeta = 0.0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(parse_solver("admm"), Error);
}

TEST(Experiment, EchoRoundTripsThroughCli) {
  const fs::path first = scratch("echo_a"), second = scratch("echo_b");
  ASSERT_EQ(run_cli("solve --problem tomo --phantom_size 16 --num_angles 8 --solver mfb --regularizer "
                    "linear_smoother --sigma_denoiser 0.05 --lambda 0.01 --iterations 15 --seed 3 --out " +
                    first.string()),
            0);
  // the config echo alone reproduces the run; the command line overrides --out
  ASSERT_EQ(run_cli("solve --config " + (first / "config.txt").string() + " --out " + second.string()), 0);
  EXPECT_EQ(slurp(first / "trace.csv"), slurp(second / "trace.csv"));
  EXPECT_EQ(slurp(first / "reconstruction.fras"), slurp(second / "reconstruction.fras"));
}

TEST(Cli, ExitCodes) {
  const fs::path out = scratch("cli");
  EXPECT_EQ(run_cli("solve --no_such_flag 1"), 2);
  EXPECT_EQ(run_cli("solve --solver mlem --regularizer smoothed_tv --out " + out.string()), 2);
  EXPECT_EQ(run_cli("solve --tau -1 --out " + out.string()), 2);
  EXPECT_EQ(run_cli("solve --truth /nonexistent/truth.pgm --out " + out.string()), 4);
  EXPECT_EQ(run_cli("metrics --truth /nonexistent/a.pgm --estimate /nonexistent/b.pgm"), 4);
  EXPECT_EQ(run_cli("solve --problem tomo --subsets 5 --solver osem --regularizer none --phantom_size 16 --out " +
                    out.string()),
            2);
}

TEST(Cli, SimulateThenSolveFromMeasurement) {
  const fs::path sim = scratch("cli_sim"), rec = scratch("cli_rec");
  ASSERT_EQ(run_cli("simulate --phantom_size 16 --kernel_size 5 --kernel_sigma 1 --seed 4 --out " + sim.string()), 0);
  ASSERT_TRUE(fs::exists(sim / "measurement.fras"));
  ASSERT_EQ(run_cli("solve --phantom_size 16 --kernel_size 5 --kernel_sigma 1 --solver mlem --regularizer none "
                    "--iterations 10 --measurement " +
                    (sim / "measurement.fras").string() + " --out " + rec.string()),
            0);
  EXPECT_EQ(run_cli("metrics --truth " + (sim / "truth.fras").string() + " --estimate " +
                    (rec / "reconstruction.fras").string()),
            0);
}

TEST(Cli, TraceCheck) {
  const fs::path out = scratch("cli_trace");
  ASSERT_EQ(run_cli("solve --phantom_size 16 --kernel_size 5 --kernel_sigma 1 --tv_epsilon 0.5 --tau 0.1 "
                    "--lambda 0.2 --iterations 30 --out " +
                    out.string()),
            0);
  EXPECT_EQ(run_cli("trace-check --trace " + (out / "trace.csv").string() +
                    " --tau 0.1 --lambda 0.2 --lipschitz_bound 16"),
            0);
  // same trace judged against a far tighter step: the bound fails
  EXPECT_EQ(run_cli("trace-check --trace " + (out / "trace.csv").string() +
                    " --tau 1e-9 --lambda 0 --lipschitz_bound 16"),
            3);
}
