#pragma once

#include "pnpmm/core.hpp"
#include "pnpmm/objective.hpp"

namespace pnpmm {

/// EM tangent majorant of the Poisson NLL at an anchor x~, in separable form
///
///   F(x, x~) = sum_j [ s_j x_j - t_j log x_j ] + C(x~),
///
/// with s = A^T 1, t = x~ * A^T(y / (A x~ + b)) and C chosen so that
/// F(x~, x~) = f(x~).
struct SurrogateContext {
  Raster anchor;
  MeasurementVector anchor_projection;  // (A x~)_i + b
  Raster em_numerator;                  // t
  Raster sensitivity;                   // s
  double anchor_value = 0.0;            // f(x~)
  double constant = 0.0;                // C(x~)
};

SurrogateContext build_context(const PoissonNLL& nll, const Raster& anchor);

/// F(x, x~); +inf when t_j > 0 and x_j = 0.
double surrogate_eval(const SurrogateContext& ctx, const Raster& x);

/// argmin_x F(x, x~) = t / s, one MLEM step.
Raster surrogate_argmin(const SurrogateContext& ctx);

/// argmin_{x >= 0} F(x, x~) + ||x - u||^2 / (2 tau), coordinate-wise
/// x_k = ((u_k - tau s_k) + sqrt((u_k - tau s_k)^2 + 4 tau t_k)) / 2.
Raster surrogate_prox(const SurrogateContext& ctx, const Raster& u, double tau);

/// Nonnegative root of x^2 - (u - tau s) x - tau t = 0 for one coordinate.
double prox_root(double u, double s, double t, double tau);

/// max_k |x_k s_k - t_k + x_k (x_k - u_k) / tau|, the KKT residual of the prox.
double prox_kkt_residual(const SurrogateContext& ctx, const Raster& u, double tau, const Raster& x);

}  // namespace pnpmm
