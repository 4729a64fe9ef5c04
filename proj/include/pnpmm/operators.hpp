#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pnpmm/core.hpp"

namespace pnpmm {

/// Nonnegative 2-D kernel with odd dimensions, row-major weights.
struct Kernel {
  std::size_t width = 1;
  std::size_t height = 1;
  std::vector<double> weights{1.0};

  Kernel() = default;
  Kernel(std::size_t w, std::size_t h, std::vector<double> weights);

  double sum() const;
  bool is_symmetric() const;
  double at(std::size_t row, std::size_t col) const { return weights[row * width + col]; }

  static Kernel delta();
  /// Normalised isotropic Gaussian of the given odd size.
  static Kernel gaussian(std::size_t size, double stddev);
  /// Normalised box kernel.
  static Kernel uniform(std::size_t size);
};

/// Plain-text kernel file: "<width> <height>" then row-major weights.
Kernel load_kernel(const std::filesystem::path& path);
void save_kernel(const std::filesystem::path& path, const Kernel& kernel);

class IdentityOperator final : public LinearOperator {
 public:
  IdentityOperator(std::size_t width, std::size_t height);

  std::size_t input_width() const override { return width_; }
  std::size_t input_height() const override { return height_; }
  std::size_t output_size() const override { return width_ * height_; }
  MeasurementVector apply(const Raster& x) const override;
  Raster adjoint(const MeasurementVector& v) const override;
  std::size_t subset_axis() const override { return height_; }
  std::string describe() const override;

 private:
  std::size_t width_;
  std::size_t height_;
};

/// Circular 2-D convolution. Output bins are the blurred image, row-major.
class ConvolutionOperator final : public LinearOperator {
 public:
  ConvolutionOperator(Kernel kernel, std::size_t width, std::size_t height);

  std::size_t input_width() const override { return width_; }
  std::size_t input_height() const override { return height_; }
  std::size_t output_size() const override { return width_ * height_; }
  MeasurementVector apply(const Raster& x) const override;
  /// Correlation with the kernel, i.e. convolution with the flipped kernel.
  Raster adjoint(const MeasurementVector& v) const override;
  std::size_t subset_axis() const override { return height_; }
  std::string describe() const override;

  const Kernel& kernel() const noexcept { return kernel_; }

 private:
  Kernel kernel_;
  std::size_t width_;
  std::size_t height_;
};

struct ProjectorGeometry {
  std::size_t num_angles = 0;
  std::vector<double> angles;  // radians in [0, pi), strictly increasing
  std::size_t num_detector_bins = 0;
  double detector_spacing = 1.0;

  /// Equally spaced angles a*pi/num_angles and a detector covering the image
  /// diagonal.
  static ProjectorGeometry parallel(std::size_t num_angles, std::size_t width, std::size_t height,
                                    double detector_spacing = 1.0);
  void validate(std::size_t width, std::size_t height) const;
};

/// Pixel-driven parallel-beam projector.
///
/// Each pixel centre is mapped to the detector coordinate
/// t = -x sin(theta) + y cos(theta) (image-centred, pixel units) and its value
/// split between the two nearest bins by linear interpolation. Angle 0
/// integrates along image rows. Output is angle-major.
class RadonProjector final : public LinearOperator {
 public:
  RadonProjector(ProjectorGeometry geometry, std::size_t width, std::size_t height);
  /// Restricted to the listed angle indices (in the given order).
  RadonProjector(ProjectorGeometry geometry, std::size_t width, std::size_t height,
                 std::vector<std::size_t> angle_indices);

  std::size_t input_width() const override { return width_; }
  std::size_t input_height() const override { return height_; }
  std::size_t output_size() const override { return angle_indices_.size() * geometry_.num_detector_bins; }
  MeasurementVector apply(const Raster& x) const override;
  Raster adjoint(const MeasurementVector& v) const override;
  std::size_t subset_axis() const override { return angle_indices_.size(); }
  std::string describe() const override;

  const ProjectorGeometry& geometry() const noexcept { return geometry_; }
  const std::vector<std::size_t>& angle_indices() const noexcept { return angle_indices_; }

 private:
  struct Tap {
    std::uint32_t bin;
    double lower_weight;  // goes to `bin`; remainder to `bin + 1`
  };

  ProjectorGeometry geometry_;
  std::size_t width_;
  std::size_t height_;
  std::vector<std::size_t> angle_indices_;
  std::vector<Tap> taps_;  // [local angle][pixel]
};

/// s * A for a positive scalar s.
class ScaledOperator final : public LinearOperator {
 public:
  ScaledOperator(OperatorPtr base, double factor);

  std::size_t input_width() const override { return base_->input_width(); }
  std::size_t input_height() const override { return base_->input_height(); }
  std::size_t output_size() const override { return base_->output_size(); }
  MeasurementVector apply(const Raster& x) const override;
  Raster adjoint(const MeasurementVector& v) const override;
  std::size_t subset_axis() const override { return base_->subset_axis(); }
  std::string describe() const override;

  double factor() const noexcept { return factor_; }

 private:
  OperatorPtr base_;
  double factor_;
};

/// Restriction of an operator to a subset of its output bins.
class BinSubsetOperator final : public LinearOperator {
 public:
  BinSubsetOperator(OperatorPtr base, std::vector<std::size_t> bins);

  std::size_t input_width() const override { return base_->input_width(); }
  std::size_t input_height() const override { return base_->input_height(); }
  std::size_t output_size() const override { return bins_.size(); }
  MeasurementVector apply(const Raster& x) const override;
  Raster adjoint(const MeasurementVector& v) const override;
  std::size_t subset_axis() const override { return 1; }
  std::string describe() const override;

 private:
  OperatorPtr base_;
  std::vector<std::size_t> bins_;
};

/// A^T 1 without the positivity requirement.
Raster raw_sensitivity(const LinearOperator& op);

/// A^T 1; throws DegenerateOperator when some pixel is unseen by A.
Raster sensitivity(const LinearOperator& op);

struct OperatorSubset {
  OperatorPtr op;
  std::vector<std::size_t> bins;  // indices into the full operator's output
  Raster sensitivity;             // may contain zeros
};

/// Partition the output along the operator's natural axis into m interleaved
/// groups (group j holds axis indices j, j+m, j+2m, ...).
std::vector<OperatorSubset> split_subsets(const OperatorPtr& op, std::size_t m);

/// Divide the operator by its maximum sensitivity. Returns the factor used.
OperatorPtr normalize_by_max_sensitivity(const OperatorPtr& op, double* factor_out = nullptr);

}  // namespace pnpmm
