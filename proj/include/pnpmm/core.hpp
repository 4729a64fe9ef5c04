#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnpmm {

enum class ErrorKind {
  Dimension,
  Domain,
  Configuration,
  DegenerateOperator,
  SingularAnchor,
  UndefinedMetric,
  Format,
  Io,
};

const char* to_string(ErrorKind kind);

/// Structured error carrying the originating module and a category.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

/// Row-major 2-D image grid.
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;

  Raster() = default;
  Raster(std::size_t w, std::size_t h, double fill = 0.0);
  Raster(std::size_t w, std::size_t h, std::vector<double> v);

  std::size_t size() const noexcept { return values.size(); }
  double& at(std::size_t row, std::size_t col) { return values[row * width + col]; }
  double at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
  bool same_shape(const Raster& other) const noexcept {
    return width == other.width && height == other.height;
  }
};

/// Flat vector of measurement bins (y, z, y-hat).
struct MeasurementVector {
  std::vector<double> bins;

  MeasurementVector() = default;
  explicit MeasurementVector(std::size_t n, double fill = 0.0) : bins(n, fill) {}
  explicit MeasurementVector(std::vector<double> b) : bins(std::move(b)) {}

  std::size_t size() const noexcept { return bins.size(); }
};

/// Nonnegative linear operator A with an exact adjoint.
///
/// Implementations must be pure: apply/adjoint may be called concurrently on
/// a shared instance.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual std::size_t input_width() const = 0;
  virtual std::size_t input_height() const = 0;
  virtual std::size_t output_size() const = 0;

  virtual MeasurementVector apply(const Raster& x) const = 0;
  virtual Raster adjoint(const MeasurementVector& v) const = 0;

  /// Number of natural subset groups along which split_subsets may partition.
  virtual std::size_t subset_axis() const = 0;

  virtual std::string describe() const = 0;

  std::size_t input_size() const { return input_width() * input_height(); }

 protected:
  void check_input(const Raster& x) const;
  void check_output(const MeasurementVector& v) const;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

/// Where pnp_mm anchors the EM majorant in the prox step: at the current
/// iterate x (the majorized forward-backward form, covered by the descent
/// guarantee) or at the half-step x' (uncertified).
enum class MajorantAnchor { Iterate, HalfStep };

/// Optimisation settings shared by every solver.
struct SolverConfig {
  double tau = 1.0;
  double lambda = 0.0;
  double sigma_denoiser = 0.0;
  int iterations = 100;
  int subsets = 1;
  double background = 0.0;
  double lipschitz_bound = 1.0;
  std::uint64_t seed = 0;
  /// Separate step on the data term; forces an uncertified run when set.
  std::optional<double> data_tau;
  /// Stop once ||x^(n+1) - x^(n)||^2 < early_stop_ratio * ||x^(n+1)||^2.
  std::optional<double> early_stop_ratio;
  MajorantAnchor anchor = MajorantAnchor::Iterate;
};

struct TraceRecord {
  double f_value = 0.0;
  double g_value = 0.0;
  double h_value = 0.0;
  double residual_sq = 0.0;
  std::optional<double> psnr;
};

/// Per-iteration convergence record.
///
/// `initial` holds the objective at x^(0) (residual_sq = 0). `records[k]`
/// holds the objective at x^(k+1) and residual_sq = ||x^(k+1) - x^(k)||^2.
struct ConvergenceTrace {
  TraceRecord initial;
  std::vector<TraceRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  /// h at x^(0), x^(1), ..., x^(N).
  std::vector<double> h_sequence() const;
};

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);

/// Neumaier-compensated summation.
class CompensatedSum {
 public:
  void add(double value) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

/// Max relative dot-product mismatch |<Ax,v> - <x,A^T v>| / (|<Ax,v>| + floor)
/// over seeded random x >= 0 and v.
double adjoint_consistency(const LinearOperator& op, int trials, std::uint64_t seed);

void require_same_shape(const Raster& a, const Raster& b, const char* module);
void require_nonnegative(const Raster& x, const char* module);

}  // namespace pnpmm
