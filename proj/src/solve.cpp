#include "pnpmm/solve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pnpmm/metrics.hpp"
#include "pnpmm/operators.hpp"

namespace pnpmm {

namespace {

constexpr const char* kModule = "solve";

std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void validate(const SolverConfig& config) {
  if (config.iterations <= 0) throw Error(ErrorKind::Configuration, kModule, "iterations must be positive");
  if (!(config.tau > 0.0)) throw Error(ErrorKind::Configuration, kModule, "tau must be positive");
  if (!(config.lambda >= 0.0)) throw Error(ErrorKind::Configuration, kModule, "lambda must be nonnegative");
  if (config.subsets <= 0) throw Error(ErrorKind::Configuration, kModule, "subsets must be positive");
  if (config.data_tau && !(*config.data_tau > 0.0)) {
    throw Error(ErrorKind::Configuration, kModule, "data_tau must be positive");
  }
}

double min_entry(const Raster& x) { return *std::min_element(x.values.begin(), x.values.end()); }

// Bookkeeping shared by every solver loop.
class RunState {
 public:
  RunState(const PoissonNLL& nll, const GradStepRegularizer* reg, double lambda,
           const SolveOptions& options)
      : nll_(nll), reg_(reg), lambda_(lambda), options_(options) {}

  TraceRecord evaluate(const Raster& x, double residual_sq) const {
    TraceRecord rec;
    rec.f_value = nll_eval(nll_, x);
    rec.g_value = (reg_ != nullptr && lambda_ != 0.0) ? reg_->eval(x) : 0.0;
    rec.h_value = lambda_ != 0.0 ? rec.f_value + lambda_ * rec.g_value : rec.f_value;
    rec.residual_sq = residual_sq;
    if (options_.truth != nullptr) {
      Raster scaled = x;
      for (auto& v : scaled.values) v /= options_.truth_scale;
      rec.psnr = psnr(*options_.truth, scaled, options_.psnr_peak);
    }
    return rec;
  }

  void start(SolveResult& result, const Raster& x0) {
    result.trace.initial = evaluate(x0, 0.0);
    result.min_iterate_value = min_entry(x0);
    if (options_.observer) options_.observer(0, x0);
  }

  /// Records x_next; returns true when the early-stop criterion fires.
  bool step(SolveResult& result, const SolverConfig& config, const Raster& x_prev, const Raster& x_next) {
    const double residual = squared_distance(x_next.values, x_prev.values);
    result.trace.records.push_back(evaluate(x_next, residual));
    result.min_iterate_value = std::min(result.min_iterate_value, min_entry(x_next));
    if (options_.observer) options_.observer(static_cast<int>(result.trace.size()), x_next);
    return config.early_stop_ratio && residual < *config.early_stop_ratio * squared_norm(x_next.values);
  }

 private:
  const PoissonNLL& nll_;
  const GradStepRegularizer* reg_;
  double lambda_;
  const SolveOptions& options_;
};

void finish(SolveResult& result, const PoissonNLL& nll, Raster x) {
  result.last_iterate = x;
  const double b = nll.background();
  if (b > 0.0) {
    for (auto& v : x.values) v = std::max(v - b, 0.0);
    result.metadata["background_correction"] = "subtract " + format_real(b) + " then clamp at 0";
  }
  result.reconstruction = std::move(x);
  result.metadata["iterations_run"] = std::to_string(result.trace.size());
}

// One EM update on a (sub)problem; pixels the subset does not see keep their value.
Raster em_update(const PoissonNLL& nll, const Raster& x) {
  const SurrogateContext ctx = build_context(nll, x);
  Raster out(x.width, x.height);
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double s = ctx.sensitivity.values[j];
    out.values[j] = s > 0.0 ? ctx.em_numerator.values[j] / s : x.values[j];
  }
  return out;
}

SolverConfig echo(const SolverConfig& config, double lipschitz) {
  SolverConfig c = config;
  c.lipschitz_bound = lipschitz;
  return c;
}

}  // namespace

bool step_condition_holds(const SolverConfig& config) {
  return config.tau * config.lambda * config.lipschitz_bound < 1.0;
}

SolveResult mlem_run(const PoissonNLL& nll, const SolverConfig& config, const SolveOptions& options) {
  validate(config);
  // validates s > 0 everywhere
  (void)sensitivity(nll.op());

  SolveResult result;
  result.config = echo(config, 0.0);
  result.config.lambda = 0.0;
  // exact surrogate minimiser: an unbounded prox step, so the rate bound is vacuous
  result.config.tau = std::numeric_limits<double>::infinity();
  result.certified = true;
  result.metadata["solver"] = "mlem";

  RunState state(nll, nullptr, 0.0, options);
  Raster x(nll.op().input_width(), nll.op().input_height(), 1.0);
  state.start(result, x);
  for (int n = 0; n < config.iterations; ++n) {
    Raster next = surrogate_argmin(build_context(nll, x));
    const bool stop = state.step(result, config, x, next);
    x = std::move(next);
    if (stop) break;
  }
  finish(result, nll, std::move(x));
  return result;
}

SolveResult osem_run(const PoissonNLL& nll, const SolverConfig& config, const SolveOptions& options) {
  validate(config);
  if (config.subsets == 1) {
    SolveResult result = mlem_run(nll, config, options);
    result.metadata["solver"] = "osem";
    result.metadata["subsets"] = "1";
    return result;
  }
  (void)sensitivity(nll.op());

  const auto subsets = split_subsets(nll.op_ptr(), static_cast<std::size_t>(config.subsets));
  std::vector<PoissonNLL> sub_problems;
  sub_problems.reserve(subsets.size());
  for (const auto& subset : subsets) {
    MeasurementVector y(subset.bins.size());
    for (std::size_t k = 0; k < subset.bins.size(); ++k) y.bins[k] = nll.y().bins[subset.bins[k]];
    sub_problems.emplace_back(std::move(y), subset.op, nll.background());
  }

  SolveResult result;
  result.config = echo(config, 0.0);
  result.config.lambda = 0.0;
  result.config.tau = std::numeric_limits<double>::infinity();
  result.certified = false;  // no monotonicity guarantee for ordered subsets
  result.metadata["solver"] = "osem";
  result.metadata["subsets"] = std::to_string(config.subsets);

  RunState state(nll, nullptr, 0.0, options);
  Raster x(nll.op().input_width(), nll.op().input_height(), 1.0);
  state.start(result, x);
  for (int n = 0; n < config.iterations; ++n) {
    Raster next = x;
    for (const auto& sub : sub_problems) next = em_update(sub, next);
    const bool stop = state.step(result, config, x, next);
    x = std::move(next);
    if (stop) break;
  }
  finish(result, nll, std::move(x));
  return result;
}

SolveResult mfb_run(const PoissonNLL& nll, const GradStepRegularizer& reg, const SolverConfig& config,
                    const SolveOptions& options) {
  validate(config);
  SolveResult result;
  result.config = echo(config, reg.lipschitz_bound());
  result.certified = step_condition_holds(result.config) && !config.data_tau;
  result.metadata["solver"] = "mfb";
  result.metadata["regularizer"] = reg.name();
  if (!result.certified) result.metadata["warning"] = "step-size condition not met; run is uncertified";

  const double data_tau = config.data_tau.value_or(config.tau);
  const double grad_step = config.tau * config.lambda;

  RunState state(nll, &reg, config.lambda, options);
  Raster x(nll.op().input_width(), nll.op().input_height(), 1.0);
  state.start(result, x);
  for (int n = 0; n < config.iterations; ++n) {
    Raster u = x;
    if (grad_step != 0.0) {
      const Raster g = reg.grad(x);
      for (std::size_t k = 0; k < u.size(); ++k) u.values[k] -= grad_step * g.values[k];
    }
    Raster next = surrogate_prox(build_context(nll, x), u, data_tau);
    const bool stop = state.step(result, config, x, next);
    x = std::move(next);
    if (stop) break;
  }
  finish(result, nll, std::move(x));
  return result;
}

namespace {

template <typename HalfStep>
SolveResult pnp_mm_loop(const PoissonNLL& nll, const GradStepRegularizer* reg, const SolverConfig& config,
                        const SolveOptions& options, SolveResult result, HalfStep&& half_step) {
  const double data_tau = config.data_tau.value_or(config.tau);
  RunState state(nll, reg, reg != nullptr ? config.lambda : 0.0, options);
  Raster x(nll.op().input_width(), nll.op().input_height(), 1.0);
  state.start(result, x);
  for (int n = 0; n < config.iterations; ++n) {
    const Raster half = half_step(x);
    Raster next;
    if (config.anchor == MajorantAnchor::HalfStep) {
      // The prox requires t >= 0, i.e. a nonnegative anchor.
      Raster anchor = half;
      for (auto& v : anchor.values) v = std::max(v, 0.0);
      next = surrogate_prox(build_context(nll, anchor), half, data_tau);
    } else {
      next = surrogate_prox(build_context(nll, x), half, data_tau);
    }
    const bool stop = state.step(result, config, x, next);
    x = std::move(next);
    if (stop) break;
  }
  finish(result, nll, std::move(x));
  if (nll.background() > 0.0) result.metadata["variant"] = "shifted-poisson";
  return result;
}

}  // namespace

SolveResult pnp_mm_run(const PoissonNLL& nll, const GradStepRegularizer& reg, const SolverConfig& config,
                       const SolveOptions& options) {
  validate(config);
  SolveResult result;
  result.config = echo(config, reg.lipschitz_bound());
  result.certified = step_condition_holds(result.config) && !config.data_tau &&
                     config.anchor == MajorantAnchor::Iterate;
  result.metadata["solver"] = "pnp_mm";
  result.metadata["regularizer"] = reg.name();
  if (config.anchor == MajorantAnchor::HalfStep) {
    result.metadata["warning"] = "majorant anchored at the half-step; run is uncertified";
  } else if (!result.certified) {
    result.metadata["warning"] = "step-size condition not met; run is uncertified";
  }

  const double weight = config.lambda * config.tau;
  return pnp_mm_loop(nll, &reg, config, options, std::move(result), [&](const Raster& x) {
    if (weight == 0.0) return x;
    // lambda tau D(x) + (1 - lambda tau) x with D = Id - grad g
    const Raster g = reg.grad(x);
    Raster half = x;
    for (std::size_t k = 0; k < half.size(); ++k) half.values[k] -= weight * g.values[k];
    return half;
  });
}

SolveResult pnp_mm_run(const PoissonNLL& nll, const Denoiser& denoiser, const SolverConfig& config,
                       const SolveOptions& options) {
  validate(config);
  if (!denoiser) throw Error(ErrorKind::Configuration, kModule, "external denoiser is empty");
  SolveResult result;
  result.config = config;
  result.certified = false;
  result.metadata["solver"] = "pnp_mm";
  result.metadata["regularizer"] = "external";
  result.metadata["warning"] = "external denoiser; run is uncertified";

  const double weight = config.lambda * config.tau;
  return pnp_mm_loop(nll, nullptr, config, options, std::move(result), [&](const Raster& x) {
    const Raster d = denoiser(x);
    require_same_shape(x, d, kModule);
    Raster half(x.width, x.height);
    for (std::size_t k = 0; k < half.size(); ++k) {
      half.values[k] = weight * d.values[k] + (1.0 - weight) * x.values[k];
    }
    return half;
  });
}

Raster final_denoise(const SolveResult& result, const GradStepRegularizer& reg, double tau) {
  Raster out = gs_denoise(reg, result.reconstruction, tau);
  for (auto& v : out.values) v = std::max(v, 0.0);
  return out;
}

bool monotonicity_check(const ConvergenceTrace& trace, double tol) {
  const auto h = trace.h_sequence();
  for (std::size_t n = 0; n + 1 < h.size(); ++n) {
    if (!(h[n + 1] <= h[n] + tol)) return false;
  }
  return true;
}

const char* to_string(RateCheck r) {
  switch (r) {
    case RateCheck::Pass: return "pass";
    case RateCheck::Fail: return "fail";
    case RateCheck::NotApplicable: return "not-applicable";
  }
  return "?";
}

std::size_t rate_check_first_failure(const ConvergenceTrace& trace, const SolverConfig& config) {
  const double decrease_rate = 1.0 / (2.0 * config.tau) - config.lambda * config.lipschitz_bound / 2.0;
  const auto h = trace.h_sequence();
  const double h0 = h.front();
  const double h_min = *std::min_element(h.begin(), h.end());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < trace.records.size(); ++n) {
    best = std::min(best, trace.records[n].residual_sq);
    const double bound = (h0 - h_min) / (static_cast<double>(n + 1) * decrease_rate);
    if (!(best <= bound)) return n + 1;
  }
  return 0;
}

RateCheck rate_check(const ConvergenceTrace& trace, const SolverConfig& config) {
  if (!step_condition_holds(config) || config.data_tau || !(config.tau > 0.0) || std::isinf(config.tau)) {
    return RateCheck::NotApplicable;
  }
  return rate_check_first_failure(trace, config) == 0 ? RateCheck::Pass : RateCheck::Fail;
}

}  // namespace pnpmm
