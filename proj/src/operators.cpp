#include "pnpmm/operators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace pnpmm {

namespace {

constexpr const char* kModule = "operators";

std::size_t wrap(std::ptrdiff_t index, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  auto r = index % m;
  if (r < 0) r += m;
  return static_cast<std::size_t>(r);
}

}  // namespace

// ---------------------------------------------------------------------------
// Kernel

Kernel::Kernel(std::size_t w, std::size_t h, std::vector<double> weights_in)
    : width(w), height(h), weights(std::move(weights_in)) {
  if (w == 0 || h == 0 || w % 2 == 0 || h % 2 == 0) {
    throw Error(ErrorKind::Configuration, kModule, "kernel dimensions must be odd and positive");
  }
  if (weights.size() != w * h) {
    throw Error(ErrorKind::Dimension, kModule,
                "kernel has " + std::to_string(weights.size()) + " weights for " +
                    std::to_string(w) + "x" + std::to_string(h));
  }
  for (double v : weights) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::Configuration, kModule, "kernel weights must be finite and nonnegative");
    }
  }
}

double Kernel::sum() const {
  CompensatedSum acc;
  for (double v : weights) acc.add(v);
  return acc.value();
}

bool Kernel::is_symmetric() const {
  const std::size_t n = weights.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (weights[k] != weights[n - 1 - k]) return false;
  }
  return true;
}

Kernel Kernel::delta() { return Kernel(1, 1, {1.0}); }

Kernel Kernel::gaussian(std::size_t size, double stddev) {
  if (size % 2 == 0 || !(stddev > 0.0)) {
    throw Error(ErrorKind::Configuration, kModule, "gaussian kernel needs odd size and stddev > 0");
  }
  const auto half = static_cast<double>(size / 2);
  std::vector<double> w(size * size);
  double total = 0.0;
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double dy = static_cast<double>(r) - half;
      const double dx = static_cast<double>(c) - half;
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * stddev * stddev));
      w[r * size + c] = v;
      total += v;
    }
  }
  for (auto& v : w) v /= total;
  return Kernel(size, size, std::move(w));
}

Kernel Kernel::uniform(std::size_t size) {
  const double v = 1.0 / static_cast<double>(size * size);
  return Kernel(size, size, std::vector<double>(size * size, v));
}

Kernel load_kernel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, kModule, "cannot open kernel file " + path.string());
  long long w = 0;
  long long h = 0;
  if (!(in >> w >> h) || w <= 0 || h <= 0) {
    throw Error(ErrorKind::Format, kModule, "malformed kernel header in " + path.string());
  }
  std::vector<double> weights;
  weights.reserve(static_cast<std::size_t>(w * h));
  double v = 0.0;
  while (in >> v) weights.push_back(v);
  if (!in.eof()) throw Error(ErrorKind::Format, kModule, "non-numeric kernel weight in " + path.string());
  if (weights.size() != static_cast<std::size_t>(w * h)) {
    throw Error(ErrorKind::Format, kModule,
                "kernel file " + path.string() + " holds " + std::to_string(weights.size()) +
                    " weights, expected " + std::to_string(w * h));
  }
  return Kernel(static_cast<std::size_t>(w), static_cast<std::size_t>(h), std::move(weights));
}

void save_kernel(const std::filesystem::path& path, const Kernel& kernel) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, kModule, "cannot write kernel file " + path.string());
  out.precision(17);
  out << kernel.width << ' ' << kernel.height << '\n';
  for (std::size_t r = 0; r < kernel.height; ++r) {
    for (std::size_t c = 0; c < kernel.width; ++c) {
      out << (c ? " " : "") << kernel.at(r, c);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Identity

IdentityOperator::IdentityOperator(std::size_t width, std::size_t height)
    : width_(width), height_(height) {
  if (width == 0 || height == 0) throw Error(ErrorKind::Dimension, kModule, "empty identity operator");
}

MeasurementVector IdentityOperator::apply(const Raster& x) const {
  check_input(x);
  return MeasurementVector(x.values);
}

Raster IdentityOperator::adjoint(const MeasurementVector& v) const {
  check_output(v);
  return Raster(width_, height_, v.bins);
}

std::string IdentityOperator::describe() const {
  return "identity(" + std::to_string(width_) + "x" + std::to_string(height_) + ")";
}

// ---------------------------------------------------------------------------
// Convolution

ConvolutionOperator::ConvolutionOperator(Kernel kernel, std::size_t width, std::size_t height)
    : kernel_(std::move(kernel)), width_(width), height_(height) {
  if (kernel_.width > width || kernel_.height > height) {
    throw Error(ErrorKind::Dimension, kModule,
                "kernel " + std::to_string(kernel_.width) + "x" + std::to_string(kernel_.height) +
                    " larger than image " + std::to_string(width) + "x" + std::to_string(height));
  }
}

MeasurementVector ConvolutionOperator::apply(const Raster& x) const {
  check_input(x);
  const auto cr = static_cast<std::ptrdiff_t>(kernel_.height / 2);
  const auto cc = static_cast<std::ptrdiff_t>(kernel_.width / 2);
  MeasurementVector out(width_ * height_);
  for (std::size_t r = 0; r < height_; ++r) {
    for (std::size_t c = 0; c < width_; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < kernel_.height; ++i) {
        const std::size_t rr = wrap(static_cast<std::ptrdiff_t>(r) - static_cast<std::ptrdiff_t>(i) + cr, height_);
        const double* row = &x.values[rr * width_];
        for (std::size_t j = 0; j < kernel_.width; ++j) {
          const std::size_t cc2 = wrap(static_cast<std::ptrdiff_t>(c) - static_cast<std::ptrdiff_t>(j) + cc, width_);
          acc += kernel_.at(i, j) * row[cc2];
        }
      }
      out.bins[r * width_ + c] = acc;
    }
  }
  return out;
}

Raster ConvolutionOperator::adjoint(const MeasurementVector& v) const {
  check_output(v);
  const auto cr = static_cast<std::ptrdiff_t>(kernel_.height / 2);
  const auto cc = static_cast<std::ptrdiff_t>(kernel_.width / 2);
  Raster out(width_, height_);
  for (std::size_t r = 0; r < height_; ++r) {
    for (std::size_t c = 0; c < width_; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < kernel_.height; ++i) {
        const std::size_t rr = wrap(static_cast<std::ptrdiff_t>(r) + static_cast<std::ptrdiff_t>(i) - cr, height_);
        const double* row = &v.bins[rr * width_];
        for (std::size_t j = 0; j < kernel_.width; ++j) {
          const std::size_t cc2 = wrap(static_cast<std::ptrdiff_t>(c) + static_cast<std::ptrdiff_t>(j) - cc, width_);
          acc += kernel_.at(i, j) * row[cc2];
        }
      }
      out.values[r * width_ + c] = acc;
    }
  }
  return out;
}

std::string ConvolutionOperator::describe() const {
  return "convolution(" + std::to_string(kernel_.width) + "x" + std::to_string(kernel_.height) +
         " kernel on " + std::to_string(width_) + "x" + std::to_string(height_) + ")";
}

// ---------------------------------------------------------------------------
// Parallel-beam projector

ProjectorGeometry ProjectorGeometry::parallel(std::size_t num_angles, std::size_t width,
                                              std::size_t height, double detector_spacing) {
  if (num_angles == 0) throw Error(ErrorKind::Configuration, kModule, "projector needs at least one angle");
  if (!(detector_spacing > 0.0)) throw Error(ErrorKind::Configuration, kModule, "detector spacing must be positive");
  ProjectorGeometry g;
  g.num_angles = num_angles;
  g.angles.resize(num_angles);
  for (std::size_t a = 0; a < num_angles; ++a) {
    g.angles[a] = std::numbers::pi * static_cast<double>(a) / static_cast<double>(num_angles);
  }
  const double diagonal = std::hypot(static_cast<double>(width), static_cast<double>(height));
  g.num_detector_bins = static_cast<std::size_t>(std::ceil(diagonal / detector_spacing)) + 1;
  g.detector_spacing = detector_spacing;
  return g;
}

void ProjectorGeometry::validate(std::size_t width, std::size_t height) const {
  if (num_angles == 0 || angles.size() != num_angles) {
    throw Error(ErrorKind::Dimension, kModule, "projector angle count does not match angle list");
  }
  for (std::size_t a = 0; a < angles.size(); ++a) {
    if (!(angles[a] >= 0.0 && angles[a] < std::numbers::pi)) {
      throw Error(ErrorKind::Configuration, kModule, "projector angles must lie in [0, pi)");
    }
    if (a > 0 && !(angles[a] > angles[a - 1])) {
      throw Error(ErrorKind::Configuration, kModule, "projector angles must be strictly increasing");
    }
  }
  if (!(detector_spacing > 0.0)) throw Error(ErrorKind::Configuration, kModule, "detector spacing must be positive");
  const double diagonal = std::hypot(static_cast<double>(width), static_cast<double>(height));
  if (static_cast<double>(num_detector_bins) < diagonal / detector_spacing) {
    throw Error(ErrorKind::Dimension, kModule,
                std::to_string(num_detector_bins) + " detector bins cannot cover a " +
                    std::to_string(width) + "x" + std::to_string(height) + " image");
  }
}

RadonProjector::RadonProjector(ProjectorGeometry geometry, std::size_t width, std::size_t height)
    : RadonProjector(geometry, width, height, [&] {
        std::vector<std::size_t> all(geometry.num_angles);
        for (std::size_t a = 0; a < all.size(); ++a) all[a] = a;
        return all;
      }()) {}

RadonProjector::RadonProjector(ProjectorGeometry geometry, std::size_t width, std::size_t height,
                               std::vector<std::size_t> angle_indices)
    : geometry_(std::move(geometry)),
      width_(width),
      height_(height),
      angle_indices_(std::move(angle_indices)) {
  if (width == 0 || height == 0) throw Error(ErrorKind::Dimension, kModule, "empty projector image");
  geometry_.validate(width, height);
  if (angle_indices_.empty()) throw Error(ErrorKind::Configuration, kModule, "projector subset has no angles");

  const std::size_t bins = geometry_.num_detector_bins;
  const double centre_col = (static_cast<double>(width) - 1.0) / 2.0;
  const double centre_row = (static_cast<double>(height) - 1.0) / 2.0;
  const double centre_bin = (static_cast<double>(bins) - 1.0) / 2.0;

  taps_.resize(angle_indices_.size() * width * height);
  for (std::size_t la = 0; la < angle_indices_.size(); ++la) {
    const std::size_t a = angle_indices_[la];
    if (a >= geometry_.num_angles) throw Error(ErrorKind::Dimension, kModule, "angle index out of range");
    const double sin_t = std::sin(geometry_.angles[a]);
    const double cos_t = std::cos(geometry_.angles[a]);
    for (std::size_t r = 0; r < height; ++r) {
      const double y = static_cast<double>(r) - centre_row;
      for (std::size_t c = 0; c < width; ++c) {
        const double x = static_cast<double>(c) - centre_col;
        const double u = (-x * sin_t + y * cos_t) / geometry_.detector_spacing + centre_bin;
        double lower = std::floor(u);
        double frac = u - lower;
        // keep the upper tap inside the detector when u lands on the last bin
        if (lower >= static_cast<double>(bins) - 1.0 && frac == 0.0) {
          lower -= 1.0;
          frac = 1.0;
        }
        if (lower < 0.0 || lower + 1.0 > static_cast<double>(bins) - 1.0) {
          throw Error(ErrorKind::Dimension, kModule, "pixel projects outside the detector");
        }
        taps_[(la * height + r) * width + c] = Tap{static_cast<std::uint32_t>(lower), 1.0 - frac};
      }
    }
  }
}

MeasurementVector RadonProjector::apply(const Raster& x) const {
  check_input(x);
  const std::size_t bins = geometry_.num_detector_bins;
  const std::size_t pixels = width_ * height_;
  MeasurementVector out(output_size());
  for (std::size_t la = 0; la < angle_indices_.size(); ++la) {
    double* sino = &out.bins[la * bins];
    const Tap* taps = &taps_[la * pixels];
    for (std::size_t p = 0; p < pixels; ++p) {
      const double v = x.values[p];
      const Tap& t = taps[p];
      sino[t.bin] += t.lower_weight * v;
      sino[t.bin + 1] += (1.0 - t.lower_weight) * v;
    }
  }
  return out;
}

Raster RadonProjector::adjoint(const MeasurementVector& v) const {
  check_output(v);
  const std::size_t bins = geometry_.num_detector_bins;
  const std::size_t pixels = width_ * height_;
  Raster out(width_, height_);
  for (std::size_t la = 0; la < angle_indices_.size(); ++la) {
    const double* sino = &v.bins[la * bins];
    const Tap* taps = &taps_[la * pixels];
    for (std::size_t p = 0; p < pixels; ++p) {
      const Tap& t = taps[p];
      out.values[p] += t.lower_weight * sino[t.bin] + (1.0 - t.lower_weight) * sino[t.bin + 1];
    }
  }
  return out;
}

std::string RadonProjector::describe() const {
  return "parallel-beam projector(" + std::to_string(angle_indices_.size()) + "/" +
         std::to_string(geometry_.num_angles) + " angles, " +
         std::to_string(geometry_.num_detector_bins) + " bins, " + std::to_string(width_) + "x" +
         std::to_string(height_) + ")";
}

// ---------------------------------------------------------------------------
// Scaled / subset wrappers

ScaledOperator::ScaledOperator(OperatorPtr base, double factor)
    : base_(std::move(base)), factor_(factor) {
  if (!base_) throw Error(ErrorKind::Configuration, kModule, "scaled operator needs a base operator");
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw Error(ErrorKind::Configuration, kModule, "operator scale must be positive and finite");
  }
}

MeasurementVector ScaledOperator::apply(const Raster& x) const {
  auto out = base_->apply(x);
  for (auto& v : out.bins) v *= factor_;
  return out;
}

Raster ScaledOperator::adjoint(const MeasurementVector& v) const {
  auto out = base_->adjoint(v);
  for (auto& value : out.values) value *= factor_;
  return out;
}

std::string ScaledOperator::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << factor_ << " * " << base_->describe();
  return os.str();
}

BinSubsetOperator::BinSubsetOperator(OperatorPtr base, std::vector<std::size_t> bins)
    : base_(std::move(base)), bins_(std::move(bins)) {
  if (!base_) throw Error(ErrorKind::Configuration, kModule, "subset operator needs a base operator");
  for (auto b : bins_) {
    if (b >= base_->output_size()) throw Error(ErrorKind::Dimension, kModule, "subset bin out of range");
  }
}

MeasurementVector BinSubsetOperator::apply(const Raster& x) const {
  const auto full = base_->apply(x);
  MeasurementVector out(bins_.size());
  for (std::size_t k = 0; k < bins_.size(); ++k) out.bins[k] = full.bins[bins_[k]];
  return out;
}

Raster BinSubsetOperator::adjoint(const MeasurementVector& v) const {
  check_output(v);
  MeasurementVector full(base_->output_size());
  for (std::size_t k = 0; k < bins_.size(); ++k) full.bins[bins_[k]] = v.bins[k];
  return base_->adjoint(full);
}

std::string BinSubsetOperator::describe() const {
  return std::to_string(bins_.size()) + "-bin subset of " + base_->describe();
}

// ---------------------------------------------------------------------------

Raster raw_sensitivity(const LinearOperator& op) {
  return op.adjoint(MeasurementVector(op.output_size(), 1.0));
}

Raster sensitivity(const LinearOperator& op) {
  Raster s = raw_sensitivity(op);
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (!(s.values[k] > 0.0)) {
      throw Error(ErrorKind::DegenerateOperator, kModule,
                  "pixel " + std::to_string(k) + " has zero sensitivity under " + op.describe());
    }
  }
  return s;
}

std::vector<OperatorSubset> split_subsets(const OperatorPtr& op, std::size_t m) {
  if (!op) throw Error(ErrorKind::Configuration, kModule, "split_subsets needs an operator");
  if (m == 0) throw Error(ErrorKind::Configuration, kModule, "subset count must be positive");
  const std::size_t axis = op->subset_axis();
  if (axis % m != 0) {
    throw Error(ErrorKind::Configuration, kModule,
                std::to_string(m) + " subsets do not divide the subset axis of length " +
                    std::to_string(axis) + " of " + op->describe());
  }

  std::vector<OperatorSubset> subsets;
  if (m == 1) {
    std::vector<std::size_t> all(op->output_size());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
    subsets.push_back({op, std::move(all), raw_sensitivity(*op)});
    return subsets;
  }

  const std::size_t chunk = op->output_size() / axis;
  const auto* radon = dynamic_cast<const RadonProjector*>(op.get());
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<std::size_t> groups;
    for (std::size_t g = j; g < axis; g += m) groups.push_back(g);
    std::vector<std::size_t> bins;
    bins.reserve(groups.size() * chunk);
    for (auto g : groups) {
      for (std::size_t k = 0; k < chunk; ++k) bins.push_back(g * chunk + k);
    }

    OperatorPtr sub;
    if (radon != nullptr) {
      std::vector<std::size_t> angles;
      for (auto g : groups) angles.push_back(radon->angle_indices()[g]);
      sub = std::make_shared<RadonProjector>(radon->geometry(), radon->input_width(),
                                             radon->input_height(), std::move(angles));
    } else {
      sub = std::make_shared<BinSubsetOperator>(op, bins);
    }
    Raster s = raw_sensitivity(*sub);
    subsets.push_back({std::move(sub), std::move(bins), std::move(s)});
  }
  return subsets;
}

OperatorPtr normalize_by_max_sensitivity(const OperatorPtr& op, double* factor_out) {
  const Raster s = sensitivity(*op);
  const double peak = *std::max_element(s.values.begin(), s.values.end());
  const double factor = 1.0 / peak;
  if (factor_out != nullptr) *factor_out = factor;
  return std::make_shared<ScaledOperator>(op, factor);
}

}  // namespace pnpmm
