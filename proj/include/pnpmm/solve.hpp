#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "pnpmm/core.hpp"
#include "pnpmm/majorize.hpp"
#include "pnpmm/objective.hpp"

namespace pnpmm {

/// Optional hooks and reporting settings for a solver run.
struct SolveOptions {
  /// Appends PSNR(truth, x / truth_scale) to every trace record.
  const Raster* truth = nullptr;
  double truth_scale = 1.0;
  double psnr_peak = 1.0;
  /// Called with (iteration, iterate) for x^(0), x^(1), ...
  std::function<void(int, const Raster&)> observer;
};

struct SolveResult {
  /// Reported image; for shifted-Poisson runs max(x^(N) - b, 0).
  Raster reconstruction;
  /// Final iterate x^(N) without any correction.
  Raster last_iterate;
  ConvergenceTrace trace;
  /// Step-size hypotheses of the convergence theorem held.
  bool certified = false;
  /// Smallest entry seen over all iterates.
  double min_iterate_value = 0.0;
  /// Configuration echo; lipschitz_bound is the regulariser's bound.
  SolverConfig config;
  std::map<std::string, std::string> metadata;
};

/// Multiplicative EM updates x <- (x / s) A^T(y / (Ax + b)) from x^(0) = 1.
SolveResult mlem_run(const PoissonNLL& nll, const SolverConfig& config, const SolveOptions& options = {});

/// MLEM cycled over config.subsets interleaved subsets; one trace record per cycle.
SolveResult osem_run(const PoissonNLL& nll, const SolverConfig& config, const SolveOptions& options = {});

/// Majorized forward-backward:
/// x <- prox_{tau F(., x)}(x - tau lambda grad g(x)).
SolveResult mfb_run(const PoissonNLL& nll, const GradStepRegularizer& reg, const SolverConfig& config,
                    const SolveOptions& options = {});

/// Two-step plug-and-play MM iteration:
///   x' = lambda tau D(x) + (1 - lambda tau) x,  D = Id - grad g
///   x  <- prox_{tau F(., a)}(x')
/// with the majorant anchor a = x by default, or a = max(x', 0) when
/// config.anchor is HalfStep. Only the first form is certified: h can rise
/// under the second. A positive NLL background gives the shifted-Poisson variant.
SolveResult pnp_mm_run(const PoissonNLL& nll, const GradStepRegularizer& reg, const SolverConfig& config,
                       const SolveOptions& options = {});

using Denoiser = std::function<Raster(const Raster&)>;

/// PnP-MM with an arbitrary denoiser in place of the gradient step. The run
/// is never certified and g is reported as 0.
SolveResult pnp_mm_run(const PoissonNLL& nll, const Denoiser& denoiser, const SolverConfig& config,
                       const SolveOptions& options = {});

/// max(x - tau grad g(x), 0) applied to the reconstruction.
Raster final_denoise(const SolveResult& result, const GradStepRegularizer& reg, double tau);

/// tau * lambda * L < 1.
bool step_condition_holds(const SolverConfig& config);

/// h[n+1] <= h[n] + tol along x^(0), x^(1), ...
bool monotonicity_check(const ConvergenceTrace& trace, double tol);

enum class RateCheck { Pass, Fail, NotApplicable };

const char* to_string(RateCheck r);

/// min_{n<=N} residual[n] <= (h0 - h_min) / (N (1/(2 tau) - lambda L / 2)) for
/// every N, with h_min the smallest h in the trace. Not applicable when the
/// step condition fails, tau is infinite (mlem, osem) or data_tau is set.
RateCheck rate_check(const ConvergenceTrace& trace, const SolverConfig& config);

/// First N (1-based) at which the rate bound fails, or 0.
std::size_t rate_check_first_failure(const ConvergenceTrace& trace, const SolverConfig& config);

}  // namespace pnpmm
