#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pnpmm/simulate.hpp"
#include "pnpmm/solve.hpp"
#include "test_support.hpp"

using namespace pnpmm;

namespace {

// g(x) = -c sum x: a constant gradient step that shifts every pixel by lambda tau c.
class TiltRegularizer final : public GradStepRegularizer {
 public:
  explicit TiltRegularizer(double c) : c_(c) {}
  double eval(const Raster& x) const override {
    double s = 0.0;
    for (double v : x.values) s += v;
    return -c_ * s;
  }
  Raster grad(const Raster& x) const override { return Raster(x.width, x.height, -c_); }
  double sigma() const override { return 0.0; }
  double lipschitz_bound() const override { return 0.0; }
  std::string name() const override { return "tilt"; }

 private:
  double c_;
};

struct Problem {
  OperatorPtr op;
  Raster truth;
  MeasurementVector counts;
};

Problem noisy_problem(OperatorPtr op, std::uint64_t seed, double scale = 20.0) {
  std::mt19937_64 rng(seed);
  Problem p{op, make_phantom(PhantomKind::Blocks, op->input_width(), op->input_height()), {}};
  for (auto& v : p.truth.values) v = scale * v + 0.5;
  p.counts = testkit::poisson_counts(rng, op->apply(p.truth));
  return p;
}

std::vector<Raster> iterates_of(const std::function<SolveResult(const SolveOptions&)>& run) {
  std::vector<Raster> xs;
  SolveOptions opts;
  opts.observer = [&](int, const Raster& x) { xs.push_back(x); };
  run(opts);
  return xs;
}

}  // namespace

TEST(Mlem, IdentityConvergesInOneStep) {
  const MeasurementVector y(std::vector<double>{0.0, 2.0, 5.0, 1.0});
  const PoissonNLL nll(y, std::make_shared<IdentityOperator>(2, 2));
  SolverConfig cfg;
  cfg.iterations = 1;
  const SolveResult r = mlem_run(nll, cfg);
  EXPECT_EQ(r.reconstruction.values, y.bins);
  ASSERT_EQ(r.trace.size(), 1u);
}

TEST(Mlem, NoiselessBlurMonotone) {
  const auto op = testkit::small_blur(4, 3, 0.7);
  std::mt19937_64 rng(2);
  const Raster truth = testkit::random_raster(rng, 4, 4, 0.5, 3.0);
  const PoissonNLL nll(op->apply(truth), op);
  SolverConfig cfg;
  cfg.iterations = 500;
  const SolveResult r = mlem_run(nll, cfg);
  EXPECT_TRUE(monotonicity_check(r.trace, 1e-10));
  EXPECT_TRUE(r.certified);
  EXPECT_EQ(r.trace.size(), 500u);
  EXPECT_GE(r.min_iterate_value, 0.0);
}

TEST(Mlem, GainInvariance) {
  const Problem p = noisy_problem(testkit::small_projector(12), 3);
  const double zeta = 7.0;
  const auto scaled_op = std::make_shared<ScaledOperator>(p.op, zeta);
  MeasurementVector scaled_y = p.counts;
  for (auto& v : scaled_y.bins) v *= zeta;
  SolverConfig cfg;
  cfg.iterations = 30;
  const auto a = iterates_of([&](const SolveOptions& o) { return mlem_run(PoissonNLL(p.counts, p.op), cfg, o); });
  const auto b =
      iterates_of([&](const SolveOptions& o) { return mlem_run(PoissonNLL(scaled_y, scaled_op), cfg, o); });
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t n = 0; n < a.size(); ++n) {
    for (std::size_t j = 0; j < a[n].size(); ++j) {
      EXPECT_NEAR(a[n].values[j], b[n].values[j], 1e-12 * std::max(1.0, a[n].values[j]));
    }
  }
}

TEST(Mlem, RateCheckNotApplicable) {
  const Problem p = noisy_problem(testkit::small_blur(8), 4);
  SolverConfig cfg;
  cfg.iterations = 20;
  const SolveResult r = mlem_run(PoissonNLL(p.counts, p.op), cfg);
  EXPECT_EQ(rate_check(r.trace, r.config), RateCheck::NotApplicable);
}

TEST(Mlem, EarlyStop) {
  const MeasurementVector y(std::vector<double>{1.0, 2.0, 3.0, 4.0});
  const PoissonNLL nll(y, std::make_shared<IdentityOperator>(2, 2));
  SolverConfig cfg;
  cfg.iterations = 50;
  cfg.early_stop_ratio = 1e-12;
  const SolveResult r = mlem_run(nll, cfg);
  EXPECT_EQ(r.trace.size(), 2u);  // step 2 lands where step 1 did
  EXPECT_EQ(r.metadata.at("iterations_run"), "2");
}

TEST(Osem, OneSubsetIsMlem) {
  const Problem p = noisy_problem(testkit::small_projector(12), 5);
  const PoissonNLL nll(p.counts, p.op);
  SolverConfig cfg;
  cfg.iterations = 25;
  const SolveResult a = mlem_run(nll, cfg);
  const SolveResult b = osem_run(nll, cfg);
  EXPECT_EQ(a.reconstruction.values, b.reconstruction.values);
  EXPECT_EQ(a.trace.h_sequence(), b.trace.h_sequence());
}

TEST(Osem, FourSubsetsReachMlemForty) {
  const Problem p = noisy_problem(testkit::small_projector(16), 6);
  const PoissonNLL nll(p.counts, p.op);
  SolverConfig cfg;
  cfg.iterations = 40;
  const double target = mlem_run(nll, cfg).trace.records.back().f_value;
  cfg.iterations = 12;
  cfg.subsets = 4;
  const SolveResult r = osem_run(nll, cfg);
  EXPECT_FALSE(r.certified);
  EXPECT_GE(r.min_iterate_value, 0.0);
  bool reached = false;
  for (const auto& rec : r.trace.records) reached |= rec.f_value <= target + 0.01 * std::abs(target);
  EXPECT_TRUE(reached);
}

TEST(Osem, GenericOperatorSubsets) {
  const Problem p = noisy_problem(testkit::small_blur(8), 7);
  SolverConfig cfg;
  cfg.iterations = 10;
  cfg.subsets = 2;
  const SolveResult r = osem_run(PoissonNLL(p.counts, p.op), cfg);
  EXPECT_GE(r.min_iterate_value, 0.0);
  EXPECT_LT(r.trace.records.back().f_value, r.trace.initial.f_value);
}

TEST(Mfb, LambdaZeroTracksF) {
  const Problem p = noisy_problem(testkit::small_blur(8), 8);
  SmoothedTvRegularizer tv(0.1);
  SolverConfig cfg;
  cfg.iterations = 30;
  cfg.tau = 0.5;
  const SolveResult r = mfb_run(PoissonNLL(p.counts, p.op), tv, cfg);
  for (const auto& rec : r.trace.records) EXPECT_EQ(rec.h_value, rec.f_value);
  EXPECT_TRUE(monotonicity_check(r.trace, 1e-10));
}

TEST(Mfb, CertificationFlags) {
  const Problem p = noisy_problem(testkit::small_blur(8), 9);
  const PoissonNLL nll(p.counts, p.op);
  SmoothedTvRegularizer tv(0.1);  // L = 80
  SolverConfig cfg;
  cfg.iterations = 3;
  cfg.tau = 1.0;
  cfg.lambda = 0.01;
  SolveResult r = mfb_run(nll, tv, cfg);
  EXPECT_TRUE(r.certified);
  EXPECT_EQ(r.config.lipschitz_bound, 80.0);
  cfg.lambda = 0.02;
  r = mfb_run(nll, tv, cfg);
  EXPECT_FALSE(r.certified);
  EXPECT_TRUE(r.metadata.count("warning"));
  cfg.lambda = 0.001;
  cfg.data_tau = 0.5;
  EXPECT_FALSE(mfb_run(nll, tv, cfg).certified);
}

TEST(Mfb, StationarityWithLinearSmoother) {
  const Problem p = noisy_problem(testkit::small_blur(16), 10);
  const auto reg = linear_smoother_regularizer(smoother_kernel_for_sigma(0.05), 0.05, 16, 16);
  SolverConfig cfg;
  cfg.iterations = 2000;
  cfg.tau = 1.0;
  cfg.lambda = 0.5 / reg->lipschitz_bound();
  const SolveResult r = mfb_run(PoissonNLL(p.counts, p.op), *reg, cfg);
  ASSERT_TRUE(r.certified);
  EXPECT_LT(std::sqrt(r.trace.records.back().residual_sq), 1e-6);
  EXPECT_TRUE(monotonicity_check(r.trace, 1e-10));
  EXPECT_EQ(rate_check(r.trace, r.config), RateCheck::Pass);
}

TEST(PnpMm, ZeroRegularizerMatchesMfbLambdaZero) {
  const Problem p = noisy_problem(testkit::small_projector(10), 11);
  const PoissonNLL nll(p.counts, p.op);
  ZeroRegularizer zero;
  SmoothedTvRegularizer tv(0.1);
  SolverConfig cfg;
  cfg.iterations = 20;
  cfg.tau = 0.3;
  const auto a = iterates_of([&](const SolveOptions& o) { return pnp_mm_run(nll, zero, cfg, o); });
  const auto b = iterates_of([&](const SolveOptions& o) { return mfb_run(nll, tv, cfg, o); });
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t n = 0; n < a.size(); ++n) EXPECT_EQ(a[n].values, b[n].values) << n;
}

TEST(PnpMm, ScalarHalfStepUpdate) {
  // x0 = 1, half-step 1 + lambda tau c = 2, then the prox at tau = 1
  const PoissonNLL nll(MeasurementVector(std::vector<double>{3.0}), std::make_shared<IdentityOperator>(1, 1));
  TiltRegularizer tilt(1.0);
  SolverConfig cfg;
  cfg.iterations = 1;
  cfg.tau = 1.0;
  cfg.lambda = 1.0;
  const SolveResult r = pnp_mm_run(nll, tilt, cfg);
  const double expected = (1.0 + std::sqrt(13.0)) / 2.0;
  EXPECT_NEAR(r.reconstruction.values[0], expected, 1e-15);
  EXPECT_NEAR(r.reconstruction.values[0], testkit::golden_section_prox(2.0, 1.0, 3.0, 1.0), 1e-8);
}

TEST(PnpMm, ZeroBackgroundShiftedPathIsBitIdentical) {
  const Problem p = noisy_problem(testkit::small_blur(8), 12);
  SmoothedTvRegularizer tv(0.2);
  SolverConfig cfg;
  cfg.iterations = 30;
  cfg.tau = 0.5;
  cfg.lambda = 0.02;
  const double sigma = 0.0;
  const MeasurementVector shifted = shifted_poisson_preprocess(p.counts, sigma);
  const auto a = iterates_of([&](const SolveOptions& o) { return pnp_mm_run(PoissonNLL(p.counts, p.op), tv, cfg, o); });
  const auto b = iterates_of([&](const SolveOptions& o) {
    return pnp_mm_run(PoissonNLL(shifted, p.op, sigma * sigma), tv, cfg, o);
  });
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t n = 0; n < a.size(); ++n) EXPECT_EQ(a[n].values, b[n].values);
}

TEST(PnpMm, ShiftedReconstructionSubtractsBackground) {
  const Problem p = noisy_problem(testkit::small_blur(8), 13);
  const double b = 0.25;
  MeasurementVector y = p.counts;
  for (auto& v : y.bins) v += b;
  SmoothedTvRegularizer tv(0.2);
  SolverConfig cfg;
  cfg.iterations = 10;
  cfg.tau = 0.5;
  cfg.lambda = 0.02;
  const SolveResult r = pnp_mm_run(PoissonNLL(y, p.op, b), tv, cfg);
  for (std::size_t j = 0; j < r.reconstruction.size(); ++j) {
    EXPECT_EQ(r.reconstruction.values[j], std::max(r.last_iterate.values[j] - b, 0.0));
  }
  EXPECT_EQ(r.metadata.at("variant"), "shifted-poisson");
}

TEST(PnpMm, CertifiedRunsMonotoneAndRateBounded) {
  for (auto op : {OperatorPtr(std::make_shared<IdentityOperator>(12, 12)), testkit::small_blur(12),
                  testkit::small_projector(12)}) {
    const Problem p = noisy_problem(op, 14);
    const PoissonNLL nll(p.counts, p.op);
    SmoothedTvRegularizer tv(0.1);
    SolverConfig cfg;
    cfg.iterations = 200;
    cfg.tau = 0.5;
    cfg.lambda = 0.9 / (cfg.tau * tv.lipschitz_bound());
    const SolveResult r = pnp_mm_run(nll, tv, cfg);
    ASSERT_TRUE(r.certified);
    EXPECT_TRUE(monotonicity_check(r.trace, 1e-10)) << op->describe();
    EXPECT_EQ(rate_check(r.trace, r.config), RateCheck::Pass) << op->describe();
    EXPECT_GE(r.min_iterate_value, 0.0);
  }
}

TEST(PnpMm, GradientStepFormTracksMfb) {
  const Problem p = noisy_problem(testkit::small_blur(12), 17);
  const PoissonNLL nll(p.counts, p.op);
  const auto reg = linear_smoother_regularizer(smoother_kernel_for_sigma(0.05), 0.05, 12, 12);
  SolverConfig cfg;
  cfg.iterations = 50;
  cfg.tau = 1.0;
  cfg.lambda = 0.9 / reg->lipschitz_bound();
  const auto a = iterates_of([&](const SolveOptions& o) { return pnp_mm_run(nll, *reg, cfg, o); });
  const auto b = iterates_of([&](const SolveOptions& o) { return mfb_run(nll, *reg, cfg, o); });
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t n = 0; n < a.size(); ++n) {
    for (std::size_t j = 0; j < a[n].size(); ++j) {
      EXPECT_NEAR(a[n].values[j], b[n].values[j], 1e-12 * (1.0 + b[n].values[j]));
    }
  }
}

TEST(PnpMm, HalfStepAnchorUsesHalfStepNumerator) {
  // A = [1 1], y = 4, b = 1, x0 = (1, 1), tilt c = 1 -> half-step (2, 2).
  // Anchored at x0: t = 1 * 4 / 3. Anchored at the half-step: t = 2 * 4 / 5.
  const PoissonNLL nll(MeasurementVector(std::vector<double>{4.0}),
                       std::make_shared<testkit::DenseOperator>(1, 2, 1, std::vector<double>{1.0, 1.0}), 1.0);
  TiltRegularizer tilt(1.0);
  SolverConfig cfg;
  cfg.iterations = 1;
  cfg.tau = 1.0;
  cfg.lambda = 1.0;
  const SolveResult iter = pnp_mm_run(nll, tilt, cfg);
  EXPECT_NEAR(iter.last_iterate.values[0], testkit::golden_section_prox(2.0, 1.0, 4.0 / 3.0, 1.0), 1e-8);

  cfg.anchor = MajorantAnchor::HalfStep;
  const SolveResult half = pnp_mm_run(nll, tilt, cfg);
  EXPECT_FALSE(half.certified);
  EXPECT_NEAR(half.last_iterate.values[0], testkit::golden_section_prox(2.0, 1.0, 8.0 / 5.0, 1.0), 1e-8);
}

TEST(PnpMm, HalfStepAnchorCanRaiseObjective) {
  // counterexample fixture: the half-step anchored map is not a majorized descent step
  const Problem p = noisy_problem(testkit::small_blur(16), 5);
  const PoissonNLL nll(p.counts, p.op);
  const auto reg = linear_smoother_regularizer(smoother_kernel_for_sigma(0.05), 0.05, 16, 16);
  SolverConfig cfg;
  cfg.iterations = 300;
  cfg.tau = 1.0;
  cfg.lambda = 0.9 / reg->lipschitz_bound();
  cfg.anchor = MajorantAnchor::HalfStep;
  const SolveResult half = pnp_mm_run(nll, *reg, cfg);
  EXPECT_FALSE(half.certified);
  EXPECT_FALSE(monotonicity_check(half.trace, 1e-8));
  cfg.anchor = MajorantAnchor::Iterate;
  const SolveResult iter = pnp_mm_run(nll, *reg, cfg);
  EXPECT_TRUE(iter.certified);
  EXPECT_TRUE(monotonicity_check(iter.trace, 1e-10));
  EXPECT_LT(iter.trace.records.back().h_value, half.trace.records.back().h_value);
}

TEST(PnpMm, ExternalDenoiserIsUncertified) {
  const Problem p = noisy_problem(testkit::small_blur(8), 15);
  SolverConfig cfg;
  cfg.iterations = 5;
  cfg.tau = 0.5;
  cfg.lambda = 1.0;
  const auto reg = linear_smoother_regularizer(Kernel::gaussian(3, 1.0), 0.0, 8, 8);
  const Denoiser d = [&](const Raster& x) { return gs_denoise(*reg, x, 1.0); };
  const SolveResult r = pnp_mm_run(PoissonNLL(p.counts, p.op), d, cfg);
  EXPECT_FALSE(r.certified);
  for (const auto& rec : r.trace.records) EXPECT_EQ(rec.g_value, 0.0);
  EXPECT_GE(r.min_iterate_value, 0.0);
}

TEST(FinalDenoise, Cases) {
  SolveResult r;
  std::mt19937_64 rng(16);
  r.reconstruction = testkit::random_raster(rng, 8, 8, 0.0, 1.0);
  SmoothedTvRegularizer tv(0.05);
  EXPECT_EQ(final_denoise(r, tv, 0.0).values, r.reconstruction.values);
  for (double v : final_denoise(r, tv, 5.0).values) EXPECT_GE(v, 0.0);
  const auto smoother = linear_smoother_regularizer(Kernel::gaussian(3, 1.0), 0.0, 8, 8);
  r.reconstruction = Raster(8, 8, 0.6);
  for (double v : final_denoise(r, *smoother, 0.3).values) EXPECT_NEAR(v, 0.6, 1e-15);
}

TEST(Monotonicity, Cases) {
  ConvergenceTrace t;
  t.initial.h_value = 10.0;
  for (double h : {9.0, 8.0, 7.0}) t.records.push_back(TraceRecord{h, 0.0, h, 1.0, std::nullopt});
  EXPECT_TRUE(monotonicity_check(t, 1e-10));
  t.records.push_back(TraceRecord{7.0 + 2e-10, 0.0, 7.0 + 2e-10, 1.0, std::nullopt});
  EXPECT_FALSE(monotonicity_check(t, 1e-10));
}

TEST(RateCheck, ConstantIterates) {
  ConvergenceTrace t;
  t.initial.h_value = 3.0;
  for (int k = 0; k < 10; ++k) t.records.push_back(TraceRecord{3.0, 0.0, 3.0, 0.0, std::nullopt});
  SolverConfig cfg;
  cfg.tau = 1.0;
  cfg.lambda = 0.1;
  cfg.lipschitz_bound = 1.0;
  EXPECT_EQ(rate_check(t, cfg), RateCheck::Pass);
}

TEST(RateCheck, OversteppedFixtureFails) {
  // An over-stepped run that oscillates between two points: h stalls while the
  // residual stays at 1, so the bound fails once N exceeds (h0 - h_min) / (c r).
  ConvergenceTrace t;
  t.initial.h_value = 2.0;
  for (int k = 0; k < 50; ++k) t.records.push_back(TraceRecord{1.9, 0.0, 1.9, 1.0, std::nullopt});
  SolverConfig cfg;
  cfg.tau = 1.0;
  cfg.lambda = 0.5;
  cfg.lipschitz_bound = 1.0;
  EXPECT_EQ(rate_check(t, cfg), RateCheck::Fail);
  // bound at N: 0.1 / (N * 0.25) < 1 from N = 1
  EXPECT_EQ(rate_check_first_failure(t, cfg), 1u);
  cfg.lambda = 2.0;
  EXPECT_EQ(rate_check(t, cfg), RateCheck::NotApplicable);
}

TEST(Config, Validation) {
  const PoissonNLL nll(MeasurementVector(std::vector<double>{1.0}), std::make_shared<IdentityOperator>(1, 1));
  SolverConfig cfg;
  cfg.iterations = 0;
  EXPECT_THROW(mlem_run(nll, cfg), Error);
  cfg.iterations = 1;
  cfg.tau = -1.0;
  ZeroRegularizer zero;
  EXPECT_THROW(mfb_run(nll, zero, cfg), Error);
}
