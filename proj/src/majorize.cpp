#include "pnpmm/majorize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pnpmm {

namespace {

constexpr const char* kModule = "majorize";

// sum_j s_j x_j - t_j log x_j, or +inf
double separable_part(const Raster& s, const Raster& t, const Raster& x) {
  CompensatedSum acc;
  for (std::size_t j = 0; j < x.size(); ++j) {
    acc.add(s.values[j] * x.values[j]);
    if (t.values[j] > 0.0) {
      if (x.values[j] <= 0.0) return std::numeric_limits<double>::infinity();
      acc.add(-t.values[j] * std::log(x.values[j]));
    }
  }
  return acc.value();
}

}  // namespace

SurrogateContext build_context(const PoissonNLL& nll, const Raster& anchor) {
  require_nonnegative(anchor, kModule);
  SurrogateContext ctx;
  ctx.anchor = anchor;
  ctx.anchor_projection = nll.shifted_projection(anchor);

  const auto& y = nll.y().bins;
  MeasurementVector ratio(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) continue;
    const double p = ctx.anchor_projection.bins[i];
    if (!(p > 0.0)) {
      throw Error(ErrorKind::SingularAnchor, kModule,
                  "projection bin " + std::to_string(i) + " is zero against a positive count");
    }
    ratio.bins[i] = y[i] / p;
  }

  Raster back = nll.op().adjoint(ratio);
  ctx.em_numerator = Raster(anchor.width, anchor.height);
  for (std::size_t j = 0; j < anchor.size(); ++j) {
    ctx.em_numerator.values[j] = anchor.values[j] * back.values[j];
  }
  ctx.sensitivity = nll.sensitivity();

  ctx.anchor_value = nll_from_projection(nll.y(), ctx.anchor_projection);
  ctx.constant = ctx.anchor_value - separable_part(ctx.sensitivity, ctx.em_numerator, anchor);
  return ctx;
}

double surrogate_eval(const SurrogateContext& ctx, const Raster& x) {
  require_same_shape(ctx.anchor, x, kModule);
  require_nonnegative(x, kModule);
  const double part = separable_part(ctx.sensitivity, ctx.em_numerator, x);
  if (std::isinf(part)) return part;
  return part + ctx.constant;
}

Raster surrogate_argmin(const SurrogateContext& ctx) {
  Raster out(ctx.anchor.width, ctx.anchor.height);
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double s = ctx.sensitivity.values[j];
    if (!(s > 0.0)) {
      throw Error(ErrorKind::DegenerateOperator, kModule,
                  "pixel " + std::to_string(j) + " has zero sensitivity");
    }
    out.values[j] = ctx.em_numerator.values[j] / s;
  }
  return out;
}

double prox_root(double u, double s, double t, double tau) {
  const double a = u - tau * s;
  const double disc = std::sqrt(std::fma(a, a, 4.0 * tau * t));
  if (a >= 0.0) return 0.5 * (a + disc);
  // a < 0: the product of the roots is -tau t, which avoids cancellation
  if (t == 0.0) return 0.0;
  return 2.0 * tau * t / (disc - a);
}

Raster surrogate_prox(const SurrogateContext& ctx, const Raster& u, double tau) {
  require_same_shape(ctx.anchor, u, kModule);
  if (!(tau > 0.0)) throw Error(ErrorKind::Domain, kModule, "prox step must be positive");
  Raster out(u.width, u.height);
  for (std::size_t k = 0; k < u.size(); ++k) {
    out.values[k] = prox_root(u.values[k], ctx.sensitivity.values[k], ctx.em_numerator.values[k], tau);
  }
  return out;
}

double prox_kkt_residual(const SurrogateContext& ctx, const Raster& u, double tau, const Raster& x) {
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xk = x.values[k];
    const double r = xk * ctx.sensitivity.values[k] - ctx.em_numerator.values[k] +
                     xk * (xk - u.values[k]) / tau;
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

}  // namespace pnpmm
