#include "pnpmm/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pnpmm {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Configuration: return "configuration error";
    case ErrorKind::DegenerateOperator: return "degenerate operator";
    case ErrorKind::SingularAnchor: return "singular anchor";
    case ErrorKind::UndefinedMetric: return "undefined metric";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Io: return "I/O error";
  }
  return "error";
}

Error::Error(ErrorKind kind, std::string module, const std::string& message)
    : std::runtime_error(module + ": " + to_string(kind) + ": " + message),
      kind_(kind),
      module_(std::move(module)) {}

Raster::Raster(std::size_t w, std::size_t h, double fill)
    : width(w), height(h), values(w * h, fill) {
  if (w == 0 || h == 0) throw Error(ErrorKind::Dimension, "core", "raster dimensions must be positive");
}

Raster::Raster(std::size_t w, std::size_t h, std::vector<double> v)
    : width(w), height(h), values(std::move(v)) {
  if (w == 0 || h == 0) throw Error(ErrorKind::Dimension, "core", "raster dimensions must be positive");
  if (values.size() != w * h) {
    throw Error(ErrorKind::Dimension, "core",
                "raster has " + std::to_string(values.size()) + " values for a " +
                    std::to_string(w) + "x" + std::to_string(h) + " grid");
  }
}

void LinearOperator::check_input(const Raster& x) const {
  if (x.width != input_width() || x.height != input_height() || x.size() != input_size()) {
    throw Error(ErrorKind::Dimension, "operators",
                describe() + " expects a " + std::to_string(input_width()) + "x" +
                    std::to_string(input_height()) + " raster, got " + std::to_string(x.width) +
                    "x" + std::to_string(x.height));
  }
}

void LinearOperator::check_output(const MeasurementVector& v) const {
  if (v.size() != output_size()) {
    throw Error(ErrorKind::Dimension, "operators",
                describe() + " expects " + std::to_string(output_size()) + " bins, got " +
                    std::to_string(v.size()));
  }
}

std::vector<double> ConvergenceTrace::h_sequence() const {
  std::vector<double> h;
  h.reserve(records.size() + 1);
  h.push_back(initial.h_value);
  for (const auto& r : records) h.push_back(r.h_value);
  return h;
}

void CompensatedSum::add(double value) noexcept {
  const double t = sum_ + value;
  if (std::abs(sum_) >= std::abs(value)) {
    compensation_ += (sum_ - t) + value;
  } else {
    compensation_ += (value - t) + sum_;
  }
  sum_ = t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::Dimension, "core",
                "dot of sequences with lengths " + std::to_string(a.size()) + " and " +
                    std::to_string(b.size()));
  }
  CompensatedSum acc;
  for (std::size_t k = 0; k < a.size(); ++k) acc.add(a[k] * b[k]);
  return acc.value();
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::Dimension, "core", "squared_distance length mismatch");
  }
  CompensatedSum acc;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    acc.add(d * d);
  }
  return acc.value();
}

double adjoint_consistency(const LinearOperator& op, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  constexpr double floor = std::numeric_limits<double>::min();

  double worst = 0.0;
  for (int t = 0; t < std::max(trials, 1); ++t) {
    Raster x(op.input_width(), op.input_height());
    for (auto& value : x.values) value = pos(rng);
    MeasurementVector v(op.output_size());
    for (auto& value : v.bins) value = sym(rng);

    const double lhs = dot(op.apply(x).bins, v.bins);
    const double rhs = dot(x.values, op.adjoint(v).values);
    worst = std::max(worst, std::abs(lhs - rhs) / (std::abs(lhs) + floor));
  }
  return worst;
}

void require_same_shape(const Raster& a, const Raster& b, const char* module) {
  if (!a.same_shape(b) || a.size() != b.size()) {
    throw Error(ErrorKind::Dimension, module,
                "shape mismatch " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                    " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

void require_nonnegative(const Raster& x, const char* module) {
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x.values[k] >= 0.0)) {
      throw Error(ErrorKind::Domain, module,
                  "negative or NaN entry at index " + std::to_string(k));
    }
  }
}

}  // namespace pnpmm
