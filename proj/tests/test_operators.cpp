#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "pnpmm/operators.hpp"
#include "test_support.hpp"

using namespace pnpmm;

TEST(Kernel, Validation) {
  EXPECT_THROW(Kernel(2, 1, {0.5, 0.5}), Error);
  EXPECT_THROW(Kernel(1, 1, {-1.0}), Error);
  const Kernel g = Kernel::gaussian(7, 1.5);
  EXPECT_NEAR(g.sum(), 1.0, 1e-15);
  EXPECT_TRUE(g.is_symmetric());
  EXPECT_FALSE(Kernel(3, 1, {0.0, 0.5, 0.5}).is_symmetric());
}

TEST(Kernel, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "pnpmm_kernel_roundtrip.txt";
  const Kernel k(3, 1, {0.1, 0.7, 0.2});
  save_kernel(path, k);
  const Kernel back = load_kernel(path);
  EXPECT_EQ(back.width, 3u);
  EXPECT_EQ(back.height, 1u);
  EXPECT_EQ(back.weights, k.weights);
  std::filesystem::remove(path);
}

TEST(Convolution, DeltaIsIdentity) {
  std::mt19937_64 rng(4);
  const Raster x = testkit::random_raster(rng, 6, 5, 0.0, 3.0);
  ConvolutionOperator op(Kernel::delta(), 6, 5);
  EXPECT_EQ(op.apply(x).bins, x.values);
  EXPECT_EQ(op.adjoint(MeasurementVector(x.values)).values, x.values);
}

TEST(Convolution, ConstantPreserved) {
  ConvolutionOperator op(Kernel::gaussian(5, 1.0), 7, 7);
  const Raster c(7, 7, 2.5);
  for (double v : op.apply(c).bins) EXPECT_NEAR(v, 2.5, 1e-14);
}

TEST(Convolution, PeriodicRowByHand) {
  ConvolutionOperator op(Kernel(3, 1, {0.25, 0.5, 0.25}), 4, 1);
  const Raster row(4, 1, {1, 2, 3, 4});
  const auto out = op.apply(row).bins;
  const std::vector<double> expected{2.0, 2.0, 3.0, 3.0};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(out[k], expected[k]);
}

TEST(Convolution, OrientationOfAsymmetricKernel) {
  // out[c] = sum_j k[j] x[c - j + 1]: weight on x[c-1] is k[2]
  ConvolutionOperator op(Kernel(3, 1, {0.0, 0.0, 1.0}), 4, 1);
  const auto out = op.apply(Raster(4, 1, {1, 2, 3, 4})).bins;
  EXPECT_EQ(out, (std::vector<double>{4, 1, 2, 3}));
}

TEST(Convolution, SymmetricKernelSelfAdjoint) {
  std::mt19937_64 rng(5);
  ConvolutionOperator op(Kernel::gaussian(5, 1.2), 8, 6);
  const Raster x = testkit::random_raster(rng, 8, 6, 0.0, 1.0);
  const auto fwd = op.apply(x).bins;
  const auto adj = op.adjoint(MeasurementVector(x.values)).values;
  for (std::size_t k = 0; k < fwd.size(); ++k) EXPECT_NEAR(fwd[k], adj[k], 1e-15);
}

TEST(Convolution, AdjointConsistencyAsymmetric) {
  std::mt19937_64 rng(6);
  std::vector<double> w(15);
  for (double& v : w) v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  ConvolutionOperator op(Kernel(5, 3, w), 8, 8);
  EXPECT_LE(adjoint_consistency(op, 10, 7), 1e-10);
}

TEST(Convolution, KernelLargerThanImage) {
  try {
    ConvolutionOperator op(Kernel::gaussian(9, 2.0), 8, 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Dimension);
  }
}

TEST(Projector, ZeroInZeroOut) {
  const auto op = testkit::small_projector(9);
  for (double v : op->apply(Raster(9, 9)).bins) EXPECT_EQ(v, 0.0);
  for (double v : op->adjoint(MeasurementVector(op->output_size())).values) EXPECT_EQ(v, 0.0);
}

TEST(Projector, CentrePixelMassPerAngle) {
  const std::size_t n = 9;
  RadonProjector op(ProjectorGeometry::parallel(12, n, n), n, n);
  Raster x(n, n);
  x.at(4, 4) = 1.0;
  const auto sino = op.apply(x).bins;
  const std::size_t bins = op.geometry().num_detector_bins;
  for (std::size_t a = 0; a < 12; ++a) {
    double mass = 0.0;
    for (std::size_t b = 0; b < bins; ++b) mass += sino[a * bins + b];
    EXPECT_NEAR(mass, 1.0, 1e-14);
  }
}

TEST(Projector, AngleZeroIntegratesRows) {
  const std::size_t n = 8;
  RadonProjector op(ProjectorGeometry::parallel(4, n, n), n, n);
  Raster x(n, n);
  for (std::size_t c = 0; c < n; ++c) x.at(2, c) = 1.0;
  const auto sino = op.apply(x).bins;
  const std::size_t bins = op.geometry().num_detector_bins;
  double peak = 0.0, mass = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    peak = std::max(peak, sino[b]);
    mass += sino[b];
  }
  EXPECT_NEAR(mass, 8.0, 1e-12);
  // a full row lands on at most two neighbouring bins
  EXPECT_GE(peak, 4.0);
}

TEST(Projector, BackprojectionSupportIsRayBand) {
  const std::size_t n = 9;
  RadonProjector op(ProjectorGeometry::parallel(6, n, n), n, n);
  const auto& geo = op.geometry();
  const std::size_t a = 2, b = geo.num_detector_bins / 2;
  MeasurementVector v(op.output_size());
  v.bins[a * geo.num_detector_bins + b] = 1.0;
  const Raster back = op.adjoint(v);
  const double t_bin = (static_cast<double>(b) - (static_cast<double>(geo.num_detector_bins) - 1.0) / 2.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double x = static_cast<double>(c) - 4.0, y = static_cast<double>(r) - 4.0;
      const double t = -x * std::sin(geo.angles[a]) + y * std::cos(geo.angles[a]);
      if (std::abs(t - t_bin) >= 1.0) EXPECT_EQ(back.at(r, c), 0.0) << r << "," << c;
      else EXPECT_GT(back.at(r, c), 0.0) << r << "," << c;
    }
  }
}

TEST(Projector, AdjointConsistency) {
  RadonProjector op(ProjectorGeometry::parallel(12, 16, 16), 16, 16);
  EXPECT_LE(adjoint_consistency(op, 5, 8), 1e-10);
  RadonProjector rect(ProjectorGeometry::parallel(7, 11, 6, 0.7), 11, 6);
  EXPECT_LE(adjoint_consistency(rect, 5, 9), 1e-10);
}

TEST(Projector, GeometryMismatch) {
  const auto geo = ProjectorGeometry::parallel(12, 8, 8);
  EXPECT_THROW(RadonProjector(geo, 32, 32), Error);
}

TEST(Sensitivity, IdentityAllOnes) {
  IdentityOperator op(5, 4);
  for (double v : sensitivity(op).values) EXPECT_EQ(v, 1.0);
}

TEST(Sensitivity, ConvolutionIsKernelSum) {
  ConvolutionOperator op(Kernel(3, 3, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}), 6, 6);
  for (double v : sensitivity(op).values) EXPECT_NEAR(v, 4.5, 1e-14);
}

TEST(Sensitivity, UnseenPixelIsDegenerate) {
  const testkit::DenseOperator op(1, 2, 1, {1.0, 0.0});
  try {
    sensitivity(op);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateOperator);
  }
}

TEST(Subsets, SingleSubsetIsOriginal) {
  const auto op = testkit::small_projector(8);
  const auto subsets = split_subsets(op, 1);
  ASSERT_EQ(subsets.size(), 1u);
  EXPECT_EQ(subsets[0].op, op);
  EXPECT_EQ(subsets[0].bins.size(), op->output_size());
}

TEST(Subsets, TwelveAnglesFourSubsetsInterleaved) {
  const auto op = testkit::small_projector(8);
  const auto subsets = split_subsets(op, 4);
  ASSERT_EQ(subsets.size(), 4u);
  const std::size_t bins = static_cast<const RadonProjector&>(*op).geometry().num_detector_bins;
  for (std::size_t j = 0; j < 4; ++j) {
    const auto& sub = static_cast<const RadonProjector&>(*subsets[j].op);
    EXPECT_EQ(sub.angle_indices(), (std::vector<std::size_t>{j, j + 4, j + 8}));
    EXPECT_EQ(subsets[j].bins.size(), 3 * bins);
    EXPECT_EQ(subsets[j].bins.front(), j * bins);
  }
  // subset forward maps agree with the rows of the full operator
  std::mt19937_64 rng(10);
  const Raster x = testkit::random_raster(rng, 8, 8, 0.0, 1.0);
  const auto full = op->apply(x).bins;
  for (const auto& s : subsets) {
    const auto part = s.op->apply(x).bins;
    for (std::size_t k = 0; k < part.size(); ++k) EXPECT_EQ(part[k], full[s.bins[k]]);
  }
}

TEST(Subsets, GenericOperatorSplitsRows) {
  const OperatorPtr op = testkit::small_blur(8, 3, 1.0);
  const auto subsets = split_subsets(op, 2);
  ASSERT_EQ(subsets.size(), 2u);
  EXPECT_LE(adjoint_consistency(*subsets[1].op, 3, 11), 1e-10);
  Raster total(8, 8);
  for (const auto& s : subsets)
    for (std::size_t k = 0; k < total.size(); ++k) total.values[k] += s.sensitivity.values[k];
  for (double v : total.values) EXPECT_NEAR(v, 1.0, 1e-14);
}

TEST(Subsets, NonDividingCountRejected) {
  try {
    split_subsets(testkit::small_projector(8), 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Configuration);
  }
}

TEST(Normalize, MaxSensitivityBecomesOne) {
  double factor = 0.0;
  const auto op = normalize_by_max_sensitivity(testkit::small_projector(8), &factor);
  double peak = 0.0;
  for (double v : raw_sensitivity(*op).values) peak = std::max(peak, v);
  EXPECT_NEAR(peak, 1.0, 1e-14);
  EXPECT_GT(factor, 0.0);
}
