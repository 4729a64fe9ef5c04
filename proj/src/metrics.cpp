#include "pnpmm/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace pnpmm {

namespace {

constexpr const char* kModule = "metrics";
constexpr std::size_t kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> taps{};
  double total = 0.0;
  for (std::size_t k = 0; k < kWindow; ++k) {
    const double d = static_cast<double>(k) - static_cast<double>(kWindow / 2);
    taps[k] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    total += taps[k];
  }
  for (auto& t : taps) t /= total;
  return taps;
}

// Separable 'valid' Gaussian filtering of a row-major image.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t w, std::size_t h,
                                 const std::array<double, kWindow>& taps) {
  const std::size_t ow = w - kWindow + 1;
  const std::size_t oh = h - kWindow + 1;
  std::vector<double> rows(ow * h);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += taps[k] * img[r * w + c + k];
      rows[r * ow + c] = acc;
    }
  }
  std::vector<double> out(ow * oh);
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += taps[k] * rows[(r + k) * ow + c];
      out[r * ow + c] = acc;
    }
  }
  return out;
}

void check_mask(const Raster& image, const RoiMask& mask) {
  if (mask.width != image.width || mask.height != image.height) {
    throw Error(ErrorKind::Dimension, kModule, "ROI '" + mask.label + "' does not match the image shape");
  }
}

}  // namespace

RoiMask::RoiMask(std::size_t w, std::size_t h, std::vector<bool> inside_in, std::string label_in)
    : width(w), height(h), inside(std::move(inside_in)), label(std::move(label_in)) {
  if (inside.size() != w * h) throw Error(ErrorKind::Dimension, kModule, "ROI mask size mismatch");
  if (count() == 0) throw Error(ErrorKind::Configuration, kModule, "ROI '" + label + "' is empty");
}

std::size_t RoiMask::count() const { return static_cast<std::size_t>(std::count(inside.begin(), inside.end(), true)); }

double psnr(const Raster& truth, const Raster& estimate, double peak) {
  require_same_shape(truth, estimate, kModule);
  if (!(peak > 0.0)) throw Error(ErrorKind::Configuration, kModule, "PSNR peak must be positive");
  const double mse = squared_distance(truth.values, estimate.values) / static_cast<double>(truth.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Raster& truth, const Raster& estimate, double peak) {
  require_same_shape(truth, estimate, kModule);
  if (truth.width < kWindow || truth.height < kWindow) {
    throw Error(ErrorKind::Dimension, kModule, "SSIM needs images of at least 11x11");
  }
  const std::size_t w = truth.width;
  const std::size_t h = truth.height;
  const auto taps = gaussian_taps();

  std::vector<double> xx(w * h), yy(w * h), xy(w * h);
  for (std::size_t k = 0; k < w * h; ++k) {
    const double a = truth.values[k];
    const double b = estimate.values[k];
    xx[k] = a * a;
    yy[k] = b * b;
    xy[k] = a * b;
  }
  const auto mu_x = filter_valid(truth.values, w, h, taps);
  const auto mu_y = filter_valid(estimate.values, w, h, taps);
  const auto e_xx = filter_valid(xx, w, h, taps);
  const auto e_yy = filter_valid(yy, w, h, taps);
  const auto e_xy = filter_valid(xy, w, h, taps);

  const double c1 = (kK1 * peak) * (kK1 * peak);
  const double c2 = (kK2 * peak) * (kK2 * peak);
  CompensatedSum acc;
  for (std::size_t k = 0; k < mu_x.size(); ++k) {
    const double mx = mu_x[k];
    const double my = mu_y[k];
    const double vx = e_xx[k] - mx * mx;
    const double vy = e_yy[k] - my * my;
    const double cov = e_xy[k] - mx * my;
    const double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
    const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
    acc.add(num / den);
  }
  return acc.value() / static_cast<double>(mu_x.size());
}

double mae(const Raster& truth, const Raster& estimate, double scale) {
  require_same_shape(truth, estimate, kModule);
  CompensatedSum acc;
  for (std::size_t k = 0; k < truth.size(); ++k) acc.add(std::abs(truth.values[k] - estimate.values[k]));
  return scale * acc.value() / static_cast<double>(truth.size());
}

double nrmse(const Raster& truth, const Raster& estimate) {
  require_same_shape(truth, estimate, kModule);
  const double denom = squared_norm(truth.values);
  if (!(denom > 0.0)) throw Error(ErrorKind::UndefinedMetric, kModule, "NRMSE of an all-zero truth");
  return std::sqrt(squared_distance(truth.values, estimate.values) / denom);
}

double cnr(const Raster& image, const RoiMask& roi_a, const RoiMask& roi_b) {
  check_mask(image, roi_a);
  check_mask(image, roi_b);
  if (roi_b.count() < 2) throw Error(ErrorKind::UndefinedMetric, kModule, "background ROI needs 2+ pixels");

  auto region_mean = [&](const RoiMask& roi) {
    CompensatedSum acc;
    for (std::size_t k = 0; k < image.size(); ++k) {
      if (roi.inside[k]) acc.add(image.values[k]);
    }
    return acc.value() / static_cast<double>(roi.count());
  };
  const double mean_a = region_mean(roi_a);
  const double mean_b = region_mean(roi_b);
  CompensatedSum var;
  for (std::size_t k = 0; k < image.size(); ++k) {
    if (roi_b.inside[k]) {
      const double d = image.values[k] - mean_b;
      var.add(d * d);
    }
  }
  const double stddev = std::sqrt(var.value() / static_cast<double>(roi_b.count()));
  if (!(stddev > 0.0)) {
    throw Error(ErrorKind::UndefinedMetric, kModule, "ROI '" + roi_b.label + "' has zero spread");
  }
  return (mean_a - mean_b) / stddev;
}

}  // namespace pnpmm
