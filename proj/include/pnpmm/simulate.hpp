#pragma once

#include <array>
#include <cstdint>

#include "pnpmm/core.hpp"

namespace pnpmm {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Every bin draws from its own stream keyed by (seed, stream id), so the
/// output does not depend on evaluation order.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  Philox4x32(std::uint64_t seed, std::uint64_t stream);

  /// Next uniform double in (0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();

  static Block round10(Block counter, std::array<std::uint32_t, 2> key);

 private:
  std::array<std::uint32_t, 2> key_;
  Block counter_{};
  Block buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;

  std::uint32_t next_u32();
};

struct NoiseSpec {
  double zeta = 1.0;
  double gauss_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Draw k ~ Poisson(mean) from the given stream. Inversion for mean <= 30,
/// transformed rejection (PTRS) above.
double poisson_variate(double mean, Philox4x32& rng);

/// Counts k[i] ~ Poisson(zeta * mean[i]); with `scaled` returns k / zeta.
MeasurementVector sample_poisson(const MeasurementVector& mean, const NoiseSpec& spec,
                                 bool scaled = false);

/// z = k / zeta + eps with eps ~ N(0, gauss_sigma^2).
MeasurementVector sample_poisson_gaussian(const MeasurementVector& mean, const NoiseSpec& spec);

/// y-hat[i] = max(z[i] + sigma^2, 0).
MeasurementVector shifted_poisson_preprocess(const MeasurementVector& z, double gauss_sigma);

/// Piecewise-constant test phantoms on [0, 1].
enum class PhantomKind { Blocks, Disc, SheppLogan };

Raster make_phantom(PhantomKind kind, std::size_t width, std::size_t height);

}  // namespace pnpmm
