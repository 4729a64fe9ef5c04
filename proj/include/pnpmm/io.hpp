#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pnpmm/core.hpp"
#include "pnpmm/metrics.hpp"

namespace pnpmm {

enum class RasterFormat { Pgm, Fras };

/// Reads binary PGM ("P5", maxval <= 255, scaled to [0, 1]) or FRAS, chosen by
/// the file's magic bytes.
Raster load_raster(const std::filesystem::path& path);

/// PGM clamps to [0, peak] and quantises with round-half-up; FRAS is lossless.
void save_raster(const std::filesystem::path& path, const Raster& raster, RasterFormat format,
                 double peak = 1.0);

/// Measurement vectors travel as FRAS rasters of height 1.
MeasurementVector load_measurement(const std::filesystem::path& path);
void save_measurement(const std::filesystem::path& path, const MeasurementVector& v);

/// PGM mask, nonzero = inside.
RoiMask load_roi(const std::filesystem::path& path, std::string label);

/// Locale-independent, 17 significant digits.
std::string format_real(double value);

/// CSV with header `iter,f,g,h,residual_sq,psnr`. Row 0 is x^(0).
void write_trace_csv(const std::filesystem::path& path, const ConvergenceTrace& trace);
ConvergenceTrace read_trace_csv(const std::filesystem::path& path);

}  // namespace pnpmm
