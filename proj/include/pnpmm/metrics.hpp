#pragma once

#include <limits>
#include <string>
#include <vector>

#include "pnpmm/core.hpp"

namespace pnpmm {

/// Returned by psnr for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// Boolean region of interest on an image grid.
struct RoiMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<bool> inside;
  std::string label;

  RoiMask(std::size_t w, std::size_t h, std::vector<bool> inside, std::string label);
  std::size_t count() const;
};

/// 10 log10(peak^2 / MSE) in dB.
double psnr(const Raster& truth, const Raster& estimate, double peak = 1.0);

/// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5, K1 0.01, K2 0.03).
double ssim(const Raster& truth, const Raster& estimate, double peak = 1.0);

/// scale * mean |truth - estimate|.
double mae(const Raster& truth, const Raster& estimate, double scale = 1.0);

/// ||estimate - truth||_2 / ||truth||_2.
double nrmse(const Raster& truth, const Raster& estimate);

/// (mean over a - mean over b) / population std over b.
double cnr(const Raster& image, const RoiMask& roi_a, const RoiMask& roi_b);

}  // namespace pnpmm
