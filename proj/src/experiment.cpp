#include "pnpmm/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "pnpmm/io.hpp"
#include "pnpmm/metrics.hpp"

namespace pnpmm {

namespace {

constexpr const char* kModule = "experiment";
constexpr double kMonotoneTol = 1e-10;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, kModule, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, kModule, "write failed for " + path.string());
}

Raster divided(Raster x, double factor) {
  for (auto& v : x.values) v /= factor;
  return x;
}

}  // namespace

const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::Identity: return "identity";
    case ProblemKind::Deblur: return "deblur";
    case ProblemKind::Tomo: return "tomo";
  }
  return "?";
}

const char* to_string(SolverKind k) {
  switch (k) {
    case SolverKind::Mlem: return "mlem";
    case SolverKind::Osem: return "osem";
    case SolverKind::Mfb: return "mfb";
    case SolverKind::PnpMm: return "pnp_mm";
  }
  return "?";
}

const char* to_string(RegularizerKind k) {
  switch (k) {
    case RegularizerKind::None: return "none";
    case RegularizerKind::LinearSmoother: return "linear_smoother";
    case RegularizerKind::SmoothedTv: return "smoothed_tv";
  }
  return "?";
}

const char* to_string(MajorantAnchor a) {
  return a == MajorantAnchor::HalfStep ? "half_step" : "iterate";
}

ProblemKind parse_problem(const std::string& s) {
  if (s == "identity") return ProblemKind::Identity;
  if (s == "deblur") return ProblemKind::Deblur;
  if (s == "tomo") return ProblemKind::Tomo;
  throw Error(ErrorKind::Configuration, kModule, "unknown problem '" + s + "'");
}

SolverKind parse_solver(const std::string& s) {
  if (s == "mlem") return SolverKind::Mlem;
  if (s == "osem") return SolverKind::Osem;
  if (s == "mfb") return SolverKind::Mfb;
  if (s == "pnp_mm") return SolverKind::PnpMm;
  throw Error(ErrorKind::Configuration, kModule, "unknown solver '" + s + "'");
}

MajorantAnchor parse_anchor(const std::string& s) {
  if (s == "iterate") return MajorantAnchor::Iterate;
  if (s == "half_step") return MajorantAnchor::HalfStep;
  throw Error(ErrorKind::Configuration, kModule, "unknown anchor '" + s + "'");
}

RegularizerKind parse_regularizer(const std::string& s) {
  if (s == "none") return RegularizerKind::None;
  if (s == "linear_smoother") return RegularizerKind::LinearSmoother;
  if (s == "smoothed_tv") return RegularizerKind::SmoothedTv;
  throw Error(ErrorKind::Configuration, kModule, "unknown regularizer '" + s + "'");
}

PhantomKind parse_phantom(const std::string& s) {
  if (s == "blocks") return PhantomKind::Blocks;
  if (s == "disc") return PhantomKind::Disc;
  if (s == "shepp_logan") return PhantomKind::SheppLogan;
  throw Error(ErrorKind::Configuration, kModule, "unknown phantom '" + s + "'");
}

void ExperimentConfig::validate() const {
  const bool em = solver == SolverKind::Mlem || solver == SolverKind::Osem;
  if (em && regularizer != RegularizerKind::None) {
    throw Error(ErrorKind::Configuration, kModule,
                std::string(pnpmm::to_string(solver)) + " takes no regularizer; use --regularizer none");
  }
  if (!truth_path.empty() && !std::filesystem::exists(truth_path)) {
    throw Error(ErrorKind::Io, kModule, "ground truth " + truth_path + " does not exist");
  }
  if (!measurement_path.empty() && !std::filesystem::exists(measurement_path)) {
    throw Error(ErrorKind::Io, kModule, "measurement " + measurement_path + " does not exist");
  }
  if (!kernel_path.empty() && !std::filesystem::exists(kernel_path)) {
    throw Error(ErrorKind::Io, kModule, "kernel " + kernel_path + " does not exist");
  }
  if (!(zeta > 0.0)) throw Error(ErrorKind::Configuration, kModule, "zeta must be positive");
  if (gauss_sigma < 0.0 || gauss_sigma_relative < 0.0) {
    throw Error(ErrorKind::Configuration, kModule, "gaussian noise level must be nonnegative");
  }
  if (phantom_size <= 0) throw Error(ErrorKind::Configuration, kModule, "phantom_size must be positive");
  if (num_angles <= 0) throw Error(ErrorKind::Configuration, kModule, "num_angles must be positive");
  if (kernel_size <= 0 || kernel_size % 2 == 0) {
    throw Error(ErrorKind::Configuration, kModule, "kernel_size must be odd and positive");
  }
  if (solver_config.iterations <= 0) throw Error(ErrorKind::Configuration, kModule, "iterations must be positive");
  if (!(solver_config.tau > 0.0)) throw Error(ErrorKind::Configuration, kModule, "tau must be positive");
  if (!(solver_config.lambda >= 0.0)) throw Error(ErrorKind::Configuration, kModule, "lambda must be nonnegative");
  if (solver_config.subsets <= 0) throw Error(ErrorKind::Configuration, kModule, "subsets must be positive");
}

std::string ExperimentConfig::echo() const {
  std::ostringstream os;
  auto str = [&](const char* key, const std::string& v) { os << key << " = \"" << v << "\"\n"; };
  auto num = [&](const char* key, double v) { os << key << " = " << format_real(v) << "\n"; };
  auto boolean = [&](const char* key, bool v) { os << key << " = " << (v ? "true" : "false") << "\n"; };
  str("problem", pnpmm::to_string(problem));
  str("kernel", kernel_path);
  os << "kernel_size = " << kernel_size << "\n";
  num("kernel_sigma", kernel_sigma);
  os << "num_angles = " << num_angles << "\n";
  num("detector_spacing", detector_spacing);
  boolean("normalize_operator", normalize_operator);
  boolean("noiseless", noiseless);
  num("zeta", zeta);
  num("gauss_sigma", gauss_sigma);
  num("gauss_sigma_relative", gauss_sigma_relative);
  os << "seed = " << seed << "\n";
  str("solver", pnpmm::to_string(solver));
  num("tau", solver_config.tau);
  num("lambda", solver_config.lambda);
  num("sigma_denoiser", solver_config.sigma_denoiser);
  os << "iterations = " << solver_config.iterations << "\n";
  os << "subsets = " << solver_config.subsets << "\n";
  if (solver_config.data_tau) num("data_tau", *solver_config.data_tau);
  if (solver_config.early_stop_ratio) num("early_stop", *solver_config.early_stop_ratio);
  str("anchor", pnpmm::to_string(solver_config.anchor));
  str("regularizer", pnpmm::to_string(regularizer));
  num("tv_epsilon", tv_epsilon);
  boolean("final_denoise", final_denoise);
  str("truth", truth_path);
  str("phantom", phantom);
  os << "phantom_size = " << phantom_size << "\n";
  str("measurement", measurement_path);
  num("background", solver_config.background);
  num("psnr_peak", psnr_peak);
  num("mae_scale", mae_scale);
  return os.str();
}

Raster experiment_truth(const ExperimentConfig& config) {
  if (!config.truth_path.empty()) return load_raster(config.truth_path);
  const auto n = static_cast<std::size_t>(config.phantom_size);
  return make_phantom(parse_phantom(config.phantom), n, n);
}

OperatorPtr experiment_operator(const ExperimentConfig& config, std::size_t width, std::size_t height) {
  OperatorPtr op;
  switch (config.problem) {
    case ProblemKind::Identity:
      op = std::make_shared<IdentityOperator>(width, height);
      break;
    case ProblemKind::Deblur: {
      Kernel k = config.kernel_path.empty()
                     ? Kernel::gaussian(static_cast<std::size_t>(config.kernel_size), config.kernel_sigma)
                     : load_kernel(config.kernel_path);
      op = std::make_shared<ConvolutionOperator>(std::move(k), width, height);
      break;
    }
    case ProblemKind::Tomo: {
      auto geom = ProjectorGeometry::parallel(static_cast<std::size_t>(config.num_angles), width, height,
                                              config.detector_spacing);
      op = std::make_shared<RadonProjector>(std::move(geom), width, height);
      break;
    }
  }
  if (config.normalize_operator) op = normalize_by_max_sensitivity(op);
  return op;
}

RegularizerPtr experiment_regularizer(const ExperimentConfig& config, std::size_t width, std::size_t height) {
  const double sigma = config.solver_config.sigma_denoiser;
  switch (config.regularizer) {
    case RegularizerKind::None: return std::make_shared<ZeroRegularizer>();
    case RegularizerKind::LinearSmoother:
      return linear_smoother_regularizer(smoother_kernel_for_sigma(sigma), sigma, width, height);
    case RegularizerKind::SmoothedTv: return smoothed_tv_regularizer(config.tv_epsilon, sigma);
  }
  return std::make_shared<ZeroRegularizer>();
}

SimulatedData simulate_measurement(const ExperimentConfig& config, const LinearOperator& op, const Raster& truth) {
  SimulatedData data;
  const MeasurementVector mean = op.apply(truth);
  if (config.noiseless) {
    data.counts = MeasurementVector(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) data.counts.bins[i] = config.zeta * mean.bins[i];
    return data;
  }

  double sigma = config.gauss_sigma;
  if (config.gauss_sigma_relative > 0.0) {
    CompensatedSum acc;
    for (double v : mean.bins) acc.add(v);
    sigma = config.gauss_sigma_relative * acc.value() / static_cast<double>(mean.size());
  }
  data.gauss_sigma = sigma;
  const NoiseSpec spec{config.zeta, sigma, config.seed};
  if (sigma == 0.0) {
    data.counts = sample_poisson(mean, spec);
    return data;
  }
  // z = k / zeta + eps, mapped to counts: zeta z = k + zeta eps, shifted by (zeta sigma)^2
  MeasurementVector z = sample_poisson_gaussian(mean, spec);
  for (auto& v : z.bins) v *= config.zeta;
  const double count_sigma = config.zeta * sigma;
  data.counts = shifted_poisson_preprocess(z, count_sigma);
  data.background = count_sigma * count_sigma;
  return data;
}

ExperimentSummary run_pipeline(const ExperimentConfig& config) {
  config.validate();
  ExperimentSummary summary;
  summary.truth = experiment_truth(config);
  const std::size_t w = summary.truth.width;
  const std::size_t h = summary.truth.height;
  const OperatorPtr op = experiment_operator(config, w, h);

  SimulatedData data;
  if (!config.measurement_path.empty()) {
    data.counts = load_measurement(config.measurement_path);
    data.background = config.solver_config.background;
  } else {
    data = simulate_measurement(config, *op, summary.truth);
  }

  const PoissonNLL nll(data.counts, op, data.background);
  const RegularizerPtr reg = experiment_regularizer(config, w, h);

  SolverConfig solver_config = config.solver_config;
  solver_config.background = data.background;
  solver_config.seed = config.seed;

  SolveOptions options;
  options.truth = &summary.truth;
  options.truth_scale = config.zeta;
  options.psnr_peak = config.psnr_peak;

  switch (config.solver) {
    case SolverKind::Mlem: summary.result = mlem_run(nll, solver_config, options); break;
    case SolverKind::Osem: summary.result = osem_run(nll, solver_config, options); break;
    case SolverKind::Mfb: summary.result = mfb_run(nll, *reg, solver_config, options); break;
    case SolverKind::PnpMm: summary.result = pnp_mm_run(nll, *reg, solver_config, options); break;
  }
  summary.result.metadata["operator"] = op->describe();
  summary.result.metadata["nrmse_convention"] = "l2 norm of truth";

  summary.image = divided(summary.result.reconstruction, config.zeta);
  if (config.final_denoise && config.regularizer != RegularizerKind::None) {
    summary.denoised_image = divided(final_denoise(summary.result, *reg, solver_config.tau), config.zeta);
    summary.result.metadata["post_processing"] = "final gradient-step denoise";
  }
  const Raster& reported = summary.denoised_image ? *summary.denoised_image : summary.image;

  summary.psnr = psnr(summary.truth, reported, config.psnr_peak);
  summary.ssim = (w >= 11 && h >= 11) ? ssim(summary.truth, reported, config.psnr_peak)
                                      : std::numeric_limits<double>::quiet_NaN();
  summary.mae = mae(summary.truth, reported, config.mae_scale);
  summary.nrmse = nrmse(summary.truth, reported);
  summary.monotone = monotonicity_check(summary.result.trace, kMonotoneTol);
  summary.rate = rate_check(summary.result.trace, summary.result.config);
  return summary;
}

ExperimentSummary run_experiment(const ExperimentConfig& config) {
  ExperimentSummary summary = run_pipeline(config);
  const std::filesystem::path dir(config.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, kModule, "cannot create " + dir.string() + ": " + ec.message());

  save_raster(dir / "reconstruction.fras", summary.image, RasterFormat::Fras);
  save_raster(dir / "reconstruction.pgm", summary.image, RasterFormat::Pgm, config.psnr_peak);
  if (summary.denoised_image) {
    save_raster(dir / "denoised.fras", *summary.denoised_image, RasterFormat::Fras);
    save_raster(dir / "denoised.pgm", *summary.denoised_image, RasterFormat::Pgm, config.psnr_peak);
  }
  if (summary.result.config.background > 0.0) {
    save_raster(dir / "last_iterate.fras", divided(summary.result.last_iterate, config.zeta), RasterFormat::Fras);
  }
  write_trace_csv(dir / "trace.csv", summary.result.trace);

  std::string metrics = "metric,value,note\n";
  metrics += "psnr," + format_real(summary.psnr) + ",peak " + format_real(config.psnr_peak) + "\n";
  metrics += "ssim," + format_real(summary.ssim) + ",11x11 gaussian window sigma 1.5\n";
  metrics += "mae," + format_real(summary.mae) + ",scale " + format_real(config.mae_scale) + "\n";
  metrics += "nrmse," + format_real(summary.nrmse) + ",l2 norm of truth\n";
  metrics += std::string("certified,") + (summary.result.certified ? "1" : "0") + ",tau*lambda*L < 1\n";
  metrics += std::string("monotone,") + (summary.monotone ? "1" : "0") + ",tol 1e-10\n";
  metrics += std::string("rate_check,") + to_string(summary.rate) + ",\n";
  write_text(dir / "metrics.csv", metrics);

  std::string echo = config.echo();
  echo += "# derived\n";
  echo += "# lipschitz_bound = " + format_real(summary.result.config.lipschitz_bound) + "\n";
  echo += "# background = " + format_real(summary.result.config.background) + "\n";
  for (const auto& [key, value] : summary.result.metadata) echo += "# " + key + ": " + value + "\n";
  write_text(dir / "config.txt", echo);
  return summary;
}

}  // namespace pnpmm
