// Experiment runner: simulate, solve, metrics, trace-check.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pnpmm/experiment.hpp"
#include "pnpmm/io.hpp"
#include "pnpmm/metrics.hpp"
#include "pnpmm/solve.hpp"

namespace {

using namespace pnpmm;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Configuration: return kExitConfig;
    case ErrorKind::Io:
    case ErrorKind::Format: return kExitIo;
    default: return kExitNumeric;
  }
}

// Subcommand-level --config files are not read by the parser, so splice their
// entries into the argument list. Keys given on the command line win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  auto it = std::find(args.begin(), args.end(), "--config");
  if (it == args.end() || it + 1 == args.end() || args.size() < 2) return args;
  const std::string path = *(it + 1);
  args.erase(it, it + 2);

  auto given = [&](const std::string& key) {
    const std::string flag = "--" + key;
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.starts_with(flag + "="); });
  };
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::Io, "cli", "config file not found: " + path);
  std::vector<std::string> spliced;
  for (const auto& item : CLI::ConfigTOML().from_file(path)) {
    if (item.inputs.size() != 1 || item.inputs[0].empty() || given(item.name)) continue;
    spliced.push_back("--" + item.name + "=" + item.inputs[0]);
  }
  args.insert(args.begin() + 2, spliced.begin(), spliced.end());
  return args;
}

struct CliExperiment {
  ExperimentConfig config;
  std::string problem = "deblur";
  std::string solver = "pnp_mm";
  std::string regularizer = "smoothed_tv";
  double data_tau = 0.0;
  double early_stop = 0.0;
  std::string anchor = "iterate";

  ExperimentConfig resolve() const {
    ExperimentConfig c = config;
    c.problem = parse_problem(problem);
    c.solver = parse_solver(solver);
    c.regularizer = parse_regularizer(regularizer);
    if (data_tau > 0.0) c.solver_config.data_tau = data_tau;
    if (early_stop > 0.0) c.solver_config.early_stop_ratio = early_stop;
    c.solver_config.anchor = parse_anchor(anchor);
    return c;
  }
};

void add_problem_options(CLI::App& app, CliExperiment& e) {
  auto& c = e.config;
  app.add_option("--problem", e.problem, "identity | deblur | tomo")->capture_default_str();
  app.add_option("--kernel", c.kernel_path, "kernel file (plain text)");
  app.add_option("--kernel_size", c.kernel_size, "built-in Gaussian kernel size")->capture_default_str();
  app.add_option("--kernel_sigma", c.kernel_sigma, "built-in Gaussian kernel stddev")->capture_default_str();
  app.add_option("--num_angles", c.num_angles, "projector angles in [0, pi)")->capture_default_str();
  app.add_option("--detector_spacing", c.detector_spacing, "detector bin width in pixels")->capture_default_str();
  app.add_flag("--normalize_operator", c.normalize_operator, "divide A by its max sensitivity");
  app.add_flag("--noiseless", c.noiseless, "use the expected counts zeta*Ax");
  app.add_option("--zeta", c.zeta, "gain")->capture_default_str();
  app.add_option("--gauss_sigma", c.gauss_sigma, "electronic noise stddev (image units)")->capture_default_str();
  app.add_option("--gauss_sigma_relative", c.gauss_sigma_relative,
                 "electronic noise stddev as a fraction of the mean signal");
  app.add_option("--seed", c.seed, "noise seed")->capture_default_str();
  app.add_option("--truth", c.truth_path, "ground truth raster (PGM or FRAS)");
  app.add_option("--phantom", c.phantom, "blocks | disc | shepp_logan (when no --truth)")->capture_default_str();
  app.add_option("--phantom_size", c.phantom_size, "phantom edge length")->capture_default_str();
  app.add_option("--out", c.output_dir, "output directory")->capture_default_str();
}

void add_solver_options(CLI::App& app, CliExperiment& e) {
  auto& c = e.config;
  auto& s = c.solver_config;
  app.add_option("--solver", e.solver, "mlem | osem | mfb | pnp_mm")->capture_default_str();
  app.add_option("--regularizer", e.regularizer, "none | linear_smoother | smoothed_tv")->capture_default_str();
  app.add_option("--tau", s.tau, "step size")->capture_default_str();
  app.add_option("--lambda", s.lambda, "regularisation weight")->capture_default_str();
  app.add_option("--sigma_denoiser", s.sigma_denoiser, "denoiser noise level")->capture_default_str();
  app.add_option("--iterations", s.iterations, "iterations (cycles for osem)")->capture_default_str();
  app.add_option("--subsets", s.subsets, "ordered subsets")->capture_default_str();
  app.add_option("--background", s.background, "background of a pre-simulated measurement (counts)");
  app.add_option("--data_tau", e.data_tau, "separate data-term step (uncertified)");
  app.add_option("--early_stop", e.early_stop, "stop when residual < ratio * ||x||^2");
  app.add_option("--anchor", e.anchor, "pnp_mm majorant anchor: iterate | half_step (uncertified)")
      ->capture_default_str();
  app.add_option("--tv_epsilon", c.tv_epsilon, "smoothed-TV epsilon")->capture_default_str();
  app.add_flag("--final_denoise", c.final_denoise, "apply one final gradient-step denoise");
  app.add_option("--measurement", c.measurement_path, "pre-simulated measurement (FRAS, counts)");
  app.add_option("--psnr_peak", c.psnr_peak, "PSNR / SSIM peak")->capture_default_str();
  app.add_option("--mae_scale", c.mae_scale, "MAE scale factor")->capture_default_str();
}

int run_simulate(const CliExperiment& e) {
  const ExperimentConfig config = e.resolve();
  config.validate();
  const Raster truth = experiment_truth(config);
  const OperatorPtr op = experiment_operator(config, truth.width, truth.height);
  const SimulatedData data = simulate_measurement(config, *op, truth);

  const std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);
  save_raster(dir / "truth.fras", truth, RasterFormat::Fras);
  save_measurement(dir / "measurement.fras", data.counts);
  std::cout << "wrote " << (dir / "measurement.fras").string() << " (" << data.counts.size()
            << " bins, background " << format_real(data.background) << ")\n";
  return kExitOk;
}

int run_solve(const CliExperiment& e) {
  const ExperimentSummary s = run_experiment(e.resolve());
  std::cout << "psnr " << format_real(s.psnr) << " dB, ssim " << format_real(s.ssim) << ", certified "
            << (s.result.certified ? "yes" : "no") << ", monotone " << (s.monotone ? "yes" : "no")
            << ", rate " << to_string(s.rate) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poisson inverse problems: MLEM/OSEM and plug-and-play majorization-minimization"};
  app.require_subcommand(1);

  CliExperiment simulate_args;
  auto* simulate = app.add_subcommand("simulate", "degrade a ground truth into count data");
  simulate->add_option("--config", "key = value file, e.g. a previous run's config.txt");
  add_problem_options(*simulate, simulate_args);

  CliExperiment solve_args;
  auto* solve = app.add_subcommand("solve", "simulate (or load) data, reconstruct, write reports");
  solve->add_option("--config", "key = value file, e.g. a previous run's config.txt");
  add_problem_options(*solve, solve_args);
  add_solver_options(*solve, solve_args);

  std::string truth_path, estimate_path, roi_a_path, roi_b_path;
  double peak = 1.0;
  double mae_scale = 1.0;
  auto* metrics = app.add_subcommand("metrics", "compare an estimate against ground truth");
  metrics->add_option("--truth", truth_path, "ground truth raster")->required();
  metrics->add_option("--estimate", estimate_path, "estimate raster")->required();
  metrics->add_option("--psnr_peak", peak, "PSNR / SSIM peak")->capture_default_str();
  metrics->add_option("--mae_scale", mae_scale, "MAE scale")->capture_default_str();
  metrics->add_option("--roi_a", roi_a_path, "CNR signal ROI (PGM)");
  metrics->add_option("--roi_b", roi_b_path, "CNR background ROI (PGM)");

  std::string trace_path;
  double tolerance = 1e-10;
  SolverConfig rate_config;
  auto* trace_check = app.add_subcommand("trace-check", "check monotonicity and the O(1/N) residual bound");
  trace_check->add_option("--trace", trace_path, "trace CSV")->required();
  trace_check->add_option("--tol", tolerance, "monotonicity slack")->capture_default_str();
  trace_check->add_option("--tau", rate_config.tau, "step size")->required();
  trace_check->add_option("--lambda", rate_config.lambda, "regularisation weight")->required();
  trace_check->add_option("--lipschitz_bound", rate_config.lipschitz_bound, "L of grad g")->required();

  try {
    std::vector<std::string> args;
    try {
      args = expand_config(argc, argv);
    } catch (const Error& e) {
      std::cerr << e.what() << "\n";
      return exit_code_for(e.kind());
    }
    std::vector<char*> ptrs;
    for (auto& a : args) ptrs.push_back(a.data());
    app.parse(static_cast<int>(ptrs.size()), ptrs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (simulate->parsed()) return run_simulate(simulate_args);
    if (solve->parsed()) return run_solve(solve_args);
    if (metrics->parsed()) {
      const Raster truth = load_raster(truth_path);
      const Raster estimate = load_raster(estimate_path);
      std::cout << "metric,value\n";
      std::cout << "psnr," << format_real(psnr(truth, estimate, peak)) << "\n";
      if (truth.width >= 11 && truth.height >= 11) {
        std::cout << "ssim," << format_real(ssim(truth, estimate, peak)) << "\n";
      }
      std::cout << "mae," << format_real(mae(truth, estimate, mae_scale)) << "\n";
      std::cout << "nrmse," << format_real(nrmse(truth, estimate)) << "\n";
      if (!roi_a_path.empty() && !roi_b_path.empty()) {
        std::cout << "cnr," << format_real(cnr(estimate, load_roi(roi_a_path, "a"), load_roi(roi_b_path, "b")))
                  << "\n";
      }
      return kExitOk;
    }
    if (trace_check->parsed()) {
      const ConvergenceTrace trace = read_trace_csv(trace_path);
      const bool monotone = monotonicity_check(trace, tolerance);
      const RateCheck rate = rate_check(trace, rate_config);
      std::cout << "monotone," << (monotone ? "pass" : "fail") << "\n";
      std::cout << "rate," << to_string(rate) << "\n";
      return (monotone && rate != RateCheck::Fail) ? kExitOk : kExitNumeric;
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitConfig;
}
