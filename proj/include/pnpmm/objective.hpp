#pragma once

#include <functional>
#include <memory>
#include <string>

#include "pnpmm/core.hpp"
#include "pnpmm/operators.hpp"

namespace pnpmm {

/// Poisson negative log-likelihood f(x) = sum_i (Ax)_i + b - y_i log((Ax)_i + b).
class PoissonNLL {
 public:
  PoissonNLL(MeasurementVector y, OperatorPtr op, double background = 0.0);

  const MeasurementVector& y() const noexcept { return y_; }
  const LinearOperator& op() const noexcept { return *op_; }
  const OperatorPtr& op_ptr() const noexcept { return op_; }
  double background() const noexcept { return background_; }
  /// A^T 1, possibly with zeros.
  const Raster& sensitivity() const noexcept { return sensitivity_; }

  /// (Ax)_i + b.
  MeasurementVector shifted_projection(const Raster& x) const;

 private:
  MeasurementVector y_;
  OperatorPtr op_;
  double background_;
  Raster sensitivity_;
};

/// f evaluated from a precomputed shifted projection (Ax)_i + b.
/// 0 log 0 = 0; +inf when y_i > 0 meets a zero projection.
double nll_from_projection(const MeasurementVector& y, const MeasurementVector& shifted_projection);

double nll_eval(const PoissonNLL& nll, const Raster& x);

/// Explicit regulariser g with an L-Lipschitz gradient; its gradient step
/// x - tau * grad g(x) is the denoiser.
class GradStepRegularizer {
 public:
  virtual ~GradStepRegularizer() = default;

  virtual double eval(const Raster& x) const = 0;
  virtual Raster grad(const Raster& x) const = 0;
  virtual double sigma() const = 0;
  virtual double lipschitz_bound() const = 0;
  virtual std::string name() const = 0;
};

using RegularizerPtr = std::shared_ptr<const GradStepRegularizer>;

/// g = 0. Its denoiser is the identity.
class ZeroRegularizer final : public GradStepRegularizer {
 public:
  double eval(const Raster&) const override { return 0.0; }
  Raster grad(const Raster& x) const override { return Raster(x.width, x.height); }
  double sigma() const override { return 0.0; }
  double lipschitz_bound() const override { return 0.0; }
  std::string name() const override { return "none"; }
};

/// g(x) = ||x - Bx||^2 with B a mass-preserving symmetric periodic blur.
class LinearSmootherRegularizer final : public GradStepRegularizer {
 public:
  LinearSmootherRegularizer(Kernel kernel, double sigma, std::size_t width, std::size_t height);

  double eval(const Raster& x) const override;
  Raster grad(const Raster& x) const override;
  double sigma() const override { return sigma_; }
  /// 2 max_w |1 - B(w)|^2 over the DFT grid of the image.
  double lipschitz_bound() const override { return lipschitz_; }
  std::string name() const override { return "linear_smoother"; }

  const ConvolutionOperator& smoother() const noexcept { return smoother_; }

 private:
  ConvolutionOperator smoother_;
  double sigma_;
  double lipschitz_;

  Raster residual(const Raster& x) const;  // x - Bx
};

/// g(x) = sum_p sqrt(dx^2 + dy^2 + eps^2) - eps, forward differences, periodic.
class SmoothedTvRegularizer final : public GradStepRegularizer {
 public:
  explicit SmoothedTvRegularizer(double epsilon, double sigma = 0.0);

  double eval(const Raster& x) const override;
  Raster grad(const Raster& x) const override;
  double sigma() const override { return sigma_; }
  /// 8 / eps.
  double lipschitz_bound() const override { return 8.0 / epsilon_; }
  std::string name() const override { return "smoothed_tv"; }

  double epsilon() const noexcept { return epsilon_; }

 private:
  double epsilon_;
  double sigma_;
};

/// Gaussian smoothing kernel for a linear-smoother regulariser at noise level
/// sigma: stddev = 1 + 10 sigma, support = 2 ceil(3 stddev) + 1.
Kernel smoother_kernel_for_sigma(double sigma);

/// x - tau * grad g(x).
Raster gs_denoise(const GradStepRegularizer& reg, const Raster& x, double tau);

std::shared_ptr<LinearSmootherRegularizer> linear_smoother_regularizer(const Kernel& kernel, double sigma,
                                                                       std::size_t width,
                                                                       std::size_t height);
std::shared_ptr<SmoothedTvRegularizer> smoothed_tv_regularizer(double epsilon, double sigma = 0.0);

/// h(x) = f(x) + lambda g(x).
double composite_eval(const PoissonNLL& nll, const GradStepRegularizer& reg, double lambda,
                      const Raster& x);

}  // namespace pnpmm
