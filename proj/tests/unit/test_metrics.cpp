#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "frae/metrics.hpp"
#include "support/fixtures.hpp"
#include "support/ms_ssim_reference.hpp"

namespace frae {
namespace {

Frame noisy_copy(const Frame& f, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sigma);
  Frame out = f;
  for (double& v : out.data()) v = std::clamp(v + n(rng), 0.0, 1.0);
  return out;
}

TEST(MsSsim, IdentityIsExactlyOne) {
  std::mt19937_64 rng(1);
  const Frame f = test::random_frame(176, 176, rng);
  EXPECT_EQ(ms_ssim(f, f, MsSsimConfig{}).value, 1.0);
  MsSsimConfig rep;
  rep.padding = Padding::kReplicate;
  EXPECT_EQ(ms_ssim(f, f, rep).value, 1.0);
}

TEST(MsSsim, MatchesReferenceImplementation) {
  std::mt19937_64 rng(2);
  const test::ReferenceMsSsim reference;
  std::uniform_real_distribution<double> sigma(0.02, 0.3);
  for (int trial = 0; trial < 3; ++trial) {
    const Frame a = test::translating_texture(1, 256, 0, 0, rng()).front();
    const Frame b = noisy_copy(a, sigma(rng), rng);
    EXPECT_NEAR(ms_ssim(a, b, MsSsimConfig{}).value, reference(a, b), 1e-6);
  }
}

TEST(MsSsim, Symmetric) {
  std::mt19937_64 rng(3);
  const Frame a = test::random_frame(180, 200, rng);
  const Frame b = noisy_copy(a, 0.1, rng);
  for (Padding p : {Padding::kValid, Padding::kReplicate}) {
    MsSsimConfig cfg;
    cfg.padding = p;
    EXPECT_NEAR(ms_ssim(a, b, cfg).value, ms_ssim(b, a, cfg).value, 1e-12);
  }
}

TEST(MsSsim, CornerPixelMattersMoreWithReplicatePadding) {
  std::mt19937_64 rng(4);
  const Frame a = test::translating_texture(1, 176, 0, 0, 8).front();
  for (auto [y, x] : {std::pair{0, 0}, {0, 175}, {175, 0}, {175, 175}}) {
    Frame b = a;
    for (int c = 0; c < 3; ++c) {
      b.at(c, y, x) = a.at(c, y, x) > 0.5 ? a.at(c, y, x) - 0.5 : a.at(c, y, x) + 0.5;
    }
    MsSsimConfig valid, rep;
    rep.padding = Padding::kReplicate;
    const double dv = 1.0 - ms_ssim(a, b, valid).value;
    const double dr = 1.0 - ms_ssim(a, b, rep).value;
    EXPECT_GT(dr, 0.0);
    EXPECT_GT(dr, dv) << "corner " << y << "," << x;
  }
}

TEST(MsSsim, TooSmallNamesFeasibleScales) {
  const Frame a(64, 64);
  try {
    ms_ssim(a, a, MsSsimConfig{});
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("at most 3"), std::string::npos) << e.what();
  }
  EXPECT_EQ(ms_ssim(a, a, MsSsimConfig::truncated(3, Padding::kReplicate)).value, 1.0);
}

TEST(MsSsim, ConfigValidation) {
  MsSsimConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.window_size = 10;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.weights = {0.5, 0.6};
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  const MsSsimConfig t = MsSsimConfig::truncated(3, Padding::kValid);
  double total = 0.0;
  for (double w : t.weights) total += w;
  EXPECT_NEAR(total, 1.0, 1e-15);
  EXPECT_EQ(t.min_extent(), 44);
  EXPECT_EQ(parse_padding("replicate"), Padding::kReplicate);
  EXPECT_THROW(parse_padding("zero"), InvalidArgument);
}

TEST(MsSsim, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const Frame a = test::random_frame(48, 48, rng);
  const Frame b0 = noisy_copy(a, 0.1, rng);
  const MsSsimConfig cfg = MsSsimConfig::truncated(3, Padding::kReplicate);
  Tensor ta = to_tensor(a);
  Tensor tb = to_tensor(b0);
  tb.set_requires_grad(true);
  ms_ssim(ta, tb, cfg).backward();
  const std::vector<double> g(tb.grad().begin(), tb.grad().end());
  NoGradGuard guard;
  std::uniform_int_distribution<std::size_t> pick(0, tb.numel() - 1);
  const double eps = 1e-5;
  for (int k = 0; k < 100; ++k) {
    const std::size_t i = pick(rng);
    const double orig = tb.values()[i];
    tb.mutable_values()[i] = orig + eps;
    const double up = ms_ssim(ta, tb, cfg).item();
    tb.mutable_values()[i] = orig - eps;
    const double down = ms_ssim(ta, tb, cfg).item();
    tb.mutable_values()[i] = orig;
    const double numeric = (up - down) / (2 * eps);
    EXPECT_NEAR(g[i], numeric, 1e-4 * std::max(std::abs(numeric), 1e-3));
  }
}

TEST(Psnr, KnownValues) {
  std::mt19937_64 rng(6);
  const Frame a = test::random_frame(8, 8, rng);
  EXPECT_EQ(psnr(a, a).value, std::numeric_limits<double>::infinity());
  Frame b(8, 8, 0.5);
  Frame c(8, 8, 0.6);
  EXPECT_NEAR(psnr(b, c).value, 20.0, 1e-9);
  Frame d(4, 4, 0.0);
  Frame e(4, 4, 0.0);
  for (std::size_t i = 0; i < e.data().size(); i += 2) e.data()[i] = std::sqrt(0.02);
  EXPECT_NEAR(psnr(d, e).value, 20.0, 1e-9);
}

TEST(Bpp, Arithmetic) {
  EXPECT_EQ(bits_per_pixel(64 * 48 * 3, 48, 64, 3), 1.0);
  EXPECT_EQ(bits_per_pixel(0, 48, 64, 3), 0.0);
  EXPECT_EQ(bits_per_pixel(2 * 1000, 10, 10, 1), 2 * bits_per_pixel(1000, 10, 10, 1));
  EXPECT_THROW(bits_per_pixel(1, 0, 4, 1), InvalidArgument);
  EXPECT_EQ(kStreamingBandLow, 0.09);
  EXPECT_EQ(kStreamingBandHigh, 0.13);
}

}  // namespace
}  // namespace frae
