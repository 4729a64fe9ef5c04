#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "pnpmm/core.hpp"
#include "pnpmm/objective.hpp"
#include "pnpmm/operators.hpp"
#include "pnpmm/simulate.hpp"
#include "pnpmm/solve.hpp"

namespace pnpmm {

enum class ProblemKind { Identity, Deblur, Tomo };
enum class SolverKind { Mlem, Osem, Mfb, PnpMm };
enum class RegularizerKind { None, LinearSmoother, SmoothedTv };

/// One end-to-end run: degrade a ground truth, reconstruct, report.
struct ExperimentConfig {
  ProblemKind problem = ProblemKind::Deblur;
  // deblur: kernel file, or a built-in Gaussian of the given size / stddev
  std::string kernel_path;
  int kernel_size = 9;
  double kernel_sigma = 2.0;
  // tomo
  int num_angles = 12;
  double detector_spacing = 1.0;
  bool normalize_operator = false;

  // noise
  bool noiseless = false;
  double zeta = 5.0;
  double gauss_sigma = 0.0;
  /// When > 0, gauss_sigma = gauss_sigma_relative * mean(A x) (global mean).
  double gauss_sigma_relative = 0.0;
  std::uint64_t seed = 0;

  // solver
  SolverKind solver = SolverKind::PnpMm;
  SolverConfig solver_config;
  RegularizerKind regularizer = RegularizerKind::SmoothedTv;
  double tv_epsilon = 0.05;
  bool final_denoise = false;

  // data
  std::string truth_path;
  std::string phantom = "blocks";
  int phantom_size = 64;
  /// Pre-simulated measurement in count units; skips simulation.
  std::string measurement_path;
  double psnr_peak = 1.0;
  double mae_scale = 1.0;

  std::string output_dir = "out";

  void validate() const;
  /// "key = value" lines, loadable back through the CLI's --config.
  std::string echo() const;
};

struct ExperimentSummary {
  SolveResult result;
  Raster truth;
  /// reconstruction / zeta in image units
  Raster image;
  std::optional<Raster> denoised_image;
  double psnr = 0.0;
  double ssim = 0.0;
  double mae = 0.0;
  double nrmse = 0.0;
  bool monotone = true;
  RateCheck rate = RateCheck::NotApplicable;
};

const char* to_string(ProblemKind k);
const char* to_string(SolverKind k);
const char* to_string(RegularizerKind k);
ProblemKind parse_problem(const std::string& s);
SolverKind parse_solver(const std::string& s);
RegularizerKind parse_regularizer(const std::string& s);
const char* to_string(MajorantAnchor a);
MajorantAnchor parse_anchor(const std::string& s);
PhantomKind parse_phantom(const std::string& s);

Raster experiment_truth(const ExperimentConfig& config);
OperatorPtr experiment_operator(const ExperimentConfig& config, std::size_t width, std::size_t height);
RegularizerPtr experiment_regularizer(const ExperimentConfig& config, std::size_t width, std::size_t height);

/// Count-domain data and background for the configured noise model.
struct SimulatedData {
  MeasurementVector counts;
  double background = 0.0;
  double gauss_sigma = 0.0;  // image units, after resolving the relative form
};

SimulatedData simulate_measurement(const ExperimentConfig& config, const LinearOperator& op, const Raster& truth);

/// Runs the pipeline in memory.
ExperimentSummary run_pipeline(const ExperimentConfig& config);

/// Runs the pipeline and writes reconstruction.{fras,pgm}, trace.csv,
/// metrics.csv and config.txt into config.output_dir.
ExperimentSummary run_experiment(const ExperimentConfig& config);

}  // namespace pnpmm
