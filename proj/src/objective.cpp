#include "pnpmm/objective.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

namespace pnpmm {

namespace {

constexpr const char* kModule = "objective";

}  // namespace

PoissonNLL::PoissonNLL(MeasurementVector y, OperatorPtr op, double background)
    : y_(std::move(y)), op_(std::move(op)), background_(background) {
  if (!op_) throw Error(ErrorKind::Configuration, kModule, "NLL needs a forward operator");
  if (y_.size() != op_->output_size()) {
    throw Error(ErrorKind::Dimension, kModule,
                "measurement has " + std::to_string(y_.size()) + " bins, operator produces " +
                    std::to_string(op_->output_size()));
  }
  if (!(background_ >= 0.0) || !std::isfinite(background_)) {
    throw Error(ErrorKind::Domain, kModule, "background must be finite and nonnegative");
  }
  for (std::size_t i = 0; i < y_.size(); ++i) {
    if (!(y_.bins[i] >= 0.0) || !std::isfinite(y_.bins[i])) {
      throw Error(ErrorKind::Domain, kModule, "negative or non-finite count at bin " + std::to_string(i));
    }
  }
  sensitivity_ = raw_sensitivity(*op_);
}

MeasurementVector PoissonNLL::shifted_projection(const Raster& x) const {
  MeasurementVector p = op_->apply(x);
  if (background_ != 0.0) {
    for (auto& v : p.bins) v += background_;
  }
  return p;
}

double nll_from_projection(const MeasurementVector& y, const MeasurementVector& projection) {
  if (y.size() != projection.size()) throw Error(ErrorKind::Dimension, kModule, "projection length mismatch");
  CompensatedSum acc;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = projection.bins[i];
    const double yi = y.bins[i];
    if (yi == 0.0) {
      acc.add(p);
    } else if (p <= 0.0) {
      return std::numeric_limits<double>::infinity();
    } else {
      acc.add(p);
      acc.add(-yi * std::log(p));
    }
  }
  return acc.value();
}

double nll_eval(const PoissonNLL& nll, const Raster& x) {
  require_nonnegative(x, kModule);
  return nll_from_projection(nll.y(), nll.shifted_projection(x));
}

// ---------------------------------------------------------------------------

LinearSmootherRegularizer::LinearSmootherRegularizer(Kernel kernel, double sigma, std::size_t width,
                                                     std::size_t height)
    : smoother_(kernel, width, height), sigma_(sigma) {
  if (std::abs(kernel.sum() - 1.0) > 1e-12) {
    throw Error(ErrorKind::Configuration, kModule, "smoother kernel must sum to 1");
  }
  if (!kernel.is_symmetric()) {
    throw Error(ErrorKind::Configuration, kModule, "smoother kernel must be symmetric");
  }

  // Discrete Fourier symbol of the circulant B on the width x height grid.
  const auto cr = static_cast<double>(kernel.height / 2);
  const auto cc = static_cast<double>(kernel.width / 2);
  double worst = 0.0;
  for (std::size_t p = 0; p < height; ++p) {
    const double wr = 2.0 * std::numbers::pi * static_cast<double>(p) / static_cast<double>(height);
    for (std::size_t q = 0; q < width; ++q) {
      const double wc = 2.0 * std::numbers::pi * static_cast<double>(q) / static_cast<double>(width);
      std::complex<double> symbol = 0.0;
      for (std::size_t i = 0; i < kernel.height; ++i) {
        for (std::size_t j = 0; j < kernel.width; ++j) {
          const double phase = wr * (static_cast<double>(i) - cr) + wc * (static_cast<double>(j) - cc);
          symbol += kernel.at(i, j) * std::polar(1.0, -phase);
        }
      }
      worst = std::max(worst, std::norm(1.0 - symbol));
    }
  }
  lipschitz_ = 2.0 * worst;
}

Raster LinearSmootherRegularizer::residual(const Raster& x) const {
  const auto blurred = smoother_.apply(x);
  Raster r(x.width, x.height);
  for (std::size_t k = 0; k < x.size(); ++k) r.values[k] = x.values[k] - blurred.bins[k];
  return r;
}

double LinearSmootherRegularizer::eval(const Raster& x) const {
  const Raster r = residual(x);
  return squared_norm(r.values);
}

Raster LinearSmootherRegularizer::grad(const Raster& x) const {
  const Raster r = residual(x);
  const Raster back = smoother_.adjoint(MeasurementVector(r.values));
  Raster g(x.width, x.height);
  for (std::size_t k = 0; k < x.size(); ++k) g.values[k] = 2.0 * (r.values[k] - back.values[k]);
  return g;
}

// ---------------------------------------------------------------------------

SmoothedTvRegularizer::SmoothedTvRegularizer(double epsilon, double sigma)
    : epsilon_(epsilon), sigma_(sigma) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorKind::Configuration, kModule, "smoothed TV needs epsilon > 0");
  }
}

double SmoothedTvRegularizer::eval(const Raster& x) const {
  const std::size_t w = x.width;
  const std::size_t h = x.height;
  const double eps2 = epsilon_ * epsilon_;
  CompensatedSum acc;
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t rn = (r + 1) % h;
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t cn = (c + 1) % w;
      const double dx = x.at(r, cn) - x.at(r, c);
      const double dy = x.at(rn, c) - x.at(r, c);
      const double sq = dx * dx + dy * dy;
      // sqrt(sq + eps^2) - eps without cancellation
      acc.add(sq / (std::sqrt(sq + eps2) + epsilon_));
    }
  }
  return acc.value();
}

Raster SmoothedTvRegularizer::grad(const Raster& x) const {
  const std::size_t w = x.width;
  const std::size_t h = x.height;
  const double eps2 = epsilon_ * epsilon_;
  // normalised forward differences at every pixel
  Raster px(w, h);
  Raster py(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t rn = (r + 1) % h;
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t cn = (c + 1) % w;
      const double dx = x.at(r, cn) - x.at(r, c);
      const double dy = x.at(rn, c) - x.at(r, c);
      const double norm = std::sqrt(dx * dx + dy * dy + eps2);
      px.at(r, c) = dx / norm;
      py.at(r, c) = dy / norm;
    }
  }
  Raster g(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t rp = (r + h - 1) % h;
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t cp = (c + w - 1) % w;
      g.at(r, c) = px.at(r, cp) - px.at(r, c) + py.at(rp, c) - py.at(r, c);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

Kernel smoother_kernel_for_sigma(double sigma) {
  if (!(sigma >= 0.0)) throw Error(ErrorKind::Configuration, kModule, "sigma must be nonnegative");
  const double stddev = 1.0 + 10.0 * sigma;
  const auto half = static_cast<std::size_t>(std::ceil(3.0 * stddev));
  return Kernel::gaussian(2 * half + 1, stddev);
}

Raster gs_denoise(const GradStepRegularizer& reg, const Raster& x, double tau) {
  if (tau == 0.0) return x;
  const Raster g = reg.grad(x);
  Raster out(x.width, x.height);
  for (std::size_t k = 0; k < x.size(); ++k) out.values[k] = x.values[k] - tau * g.values[k];
  return out;
}

std::shared_ptr<LinearSmootherRegularizer> linear_smoother_regularizer(const Kernel& kernel, double sigma,
                                                                       std::size_t width,
                                                                       std::size_t height) {
  return std::make_shared<LinearSmootherRegularizer>(kernel, sigma, width, height);
}

std::shared_ptr<SmoothedTvRegularizer> smoothed_tv_regularizer(double epsilon, double sigma) {
  return std::make_shared<SmoothedTvRegularizer>(epsilon, sigma);
}

double composite_eval(const PoissonNLL& nll, const GradStepRegularizer& reg, double lambda,
                      const Raster& x) {
  if (!(lambda >= 0.0)) throw Error(ErrorKind::Domain, kModule, "lambda must be nonnegative");
  const double f = nll_eval(nll, x);
  if (lambda == 0.0) return f;
  return f + lambda * reg.eval(x);
}

}  // namespace pnpmm
