#include "pnpmm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pnpmm {

namespace {

constexpr const char* kModule = "simulate";

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

void check_mean(const MeasurementVector& mean) {
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (!(mean.bins[i] >= 0.0) || !std::isfinite(mean.bins[i])) {
      throw Error(ErrorKind::Domain, kModule, "negative or non-finite mean at bin " + std::to_string(i));
    }
  }
}

void check_spec(const NoiseSpec& spec) {
  if (!(spec.zeta > 0.0) || !std::isfinite(spec.zeta)) {
    throw Error(ErrorKind::Configuration, kModule, "gain zeta must be positive");
  }
  if (!(spec.gauss_sigma >= 0.0)) {
    throw Error(ErrorKind::Configuration, kModule, "gaussian sigma must be nonnegative");
  }
}

double poisson_inversion(double mean, Philox4x32& rng) {
  const double u = rng.uniform();
  double p = std::exp(-mean);
  double cdf = p;
  double k = 0.0;
  // the tail beyond mean + 40 sd has probability far below 2^-53
  const double limit = mean + 40.0 * std::sqrt(mean) + 40.0;
  while (u > cdf && k < limit) {
    k += 1.0;
    p *= mean / k;
    cdf += p;
  }
  return k;
}

// Hoermann, "The transformed rejection method for generating Poisson random
// variables", 1993.
double poisson_ptrs(double mean, Philox4x32& rng) {
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return k;
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - std::lgamma(k + 1.0)) {
      return k;
    }
  }
}

}  // namespace

Philox4x32::Philox4x32(std::uint64_t seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      counter_{0u, 0u, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

Philox4x32::Block Philox4x32::round10(Block c, std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

std::uint32_t Philox4x32::next_u32() {
  if (used_ == 4) {
    buffer_ = round10(counter_, key_);
    if (++counter_[0] == 0) ++counter_[1];
    used_ = 0;
  }
  return buffer_[used_++];
}

double Philox4x32::uniform() {
  const std::uint64_t hi = next_u32() >> 5;  // 27 bits
  const std::uint64_t lo = next_u32() >> 6;  // 26 bits
  const std::uint64_t bits = (hi << 26) | lo;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Philox4x32::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_normal_ = true;
  return radius * std::cos(angle);
}

double poisson_variate(double mean, Philox4x32& rng) {
  if (!(mean >= 0.0)) throw Error(ErrorKind::Domain, kModule, "negative Poisson mean");
  if (mean == 0.0) return 0.0;
  return mean <= 30.0 ? poisson_inversion(mean, rng) : poisson_ptrs(mean, rng);
}

MeasurementVector sample_poisson(const MeasurementVector& mean, const NoiseSpec& spec, bool scaled) {
  check_spec(spec);
  check_mean(mean);
  MeasurementVector out(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    Philox4x32 rng(spec.seed, 2 * static_cast<std::uint64_t>(i));
    const double k = poisson_variate(spec.zeta * mean.bins[i], rng);
    out.bins[i] = scaled ? k / spec.zeta : k;
  }
  return out;
}

MeasurementVector sample_poisson_gaussian(const MeasurementVector& mean, const NoiseSpec& spec) {
  MeasurementVector z = sample_poisson(mean, spec, true);
  if (spec.gauss_sigma == 0.0) return z;
  for (std::size_t i = 0; i < z.size(); ++i) {
    Philox4x32 rng(spec.seed, 2 * static_cast<std::uint64_t>(i) + 1);
    z.bins[i] += spec.gauss_sigma * rng.normal();
  }
  return z;
}

MeasurementVector shifted_poisson_preprocess(const MeasurementVector& z, double gauss_sigma) {
  const double shift = gauss_sigma * gauss_sigma;
  MeasurementVector out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out.bins[i] = std::max(z.bins[i] + shift, 0.0);
  return out;
}

Raster make_phantom(PhantomKind kind, std::size_t width, std::size_t height) {
  Raster img(width, height);
  const double w = static_cast<double>(width);
  const double h = static_cast<double>(height);

  switch (kind) {
    case PhantomKind::Disc: {
      const double radius = 0.4 * std::min(w, h);
      for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
          const double dx = static_cast<double>(c) - (w - 1.0) / 2.0;
          const double dy = static_cast<double>(r) - (h - 1.0) / 2.0;
          img.at(r, c) = (dx * dx + dy * dy <= radius * radius) ? 1.0 : 0.0;
        }
      }
      break;
    }
    case PhantomKind::Blocks: {
      // background, two rectangles, a disc and a small bright square
      for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
          const double u = (static_cast<double>(c) + 0.5) / w;
          const double v = (static_cast<double>(r) + 0.5) / h;
          double value = 0.1;
          if (u > 0.1 && u < 0.45 && v > 0.15 && v < 0.6) value = 0.6;
          if (u > 0.55 && u < 0.9 && v > 0.1 && v < 0.35) value = 0.35;
          const double du = u - 0.65;
          const double dv = v - 0.7;
          if (du * du + dv * dv < 0.2 * 0.2) value = 0.8;
          if (u > 0.2 && u < 0.3 && v > 0.7 && v < 0.8) value = 1.0;
          img.at(r, c) = value;
        }
      }
      break;
    }
    case PhantomKind::SheppLogan: {
      struct Ellipse {
        double intensity, a, b, x0, y0, phi_deg;
      };
      // modified Shepp-Logan (Toft)
      static constexpr Ellipse kEllipses[] = {
          {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},          {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
          {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},      {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
          {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},         {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
          {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},       {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
          {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},     {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
      };
      for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
          const double x = (2.0 * static_cast<double>(c) + 1.0) / w - 1.0;
          const double y = 1.0 - (2.0 * static_cast<double>(r) + 1.0) / h;
          double value = 0.0;
          for (const auto& e : kEllipses) {
            const double phi = e.phi_deg * std::numbers::pi / 180.0;
            const double xr = (x - e.x0) * std::cos(phi) + (y - e.y0) * std::sin(phi);
            const double yr = -(x - e.x0) * std::sin(phi) + (y - e.y0) * std::cos(phi);
            if ((xr * xr) / (e.a * e.a) + (yr * yr) / (e.b * e.b) <= 1.0) value += e.intensity;
          }
          img.at(r, c) = std::clamp(value, 0.0, 1.0);
        }
      }
      break;
    }
  }
  return img;
}

}  // namespace pnpmm
