#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "frae/codec.hpp"
#include "frae/model.hpp"
#include "support/fixtures.hpp"

namespace frae {
namespace {

using test::small_config;

int brute_force_nearest(double y, const std::vector<double>& centers) {
  std::vector<std::pair<double, int>> d;
  for (int j = 0; j < static_cast<int>(centers.size()); ++j) {
    d.emplace_back((y - centers[j]) * (y - centers[j]), j);
  }
  return std::min_element(d.begin(), d.end())->second;
}

TEST(Quantizer, NearestCenterExamples) {
  const double three[] = {-1.0, 0.0, 1.0};
  EXPECT_EQ(ops::nearest_center(0.4, three, 3), 1);
  const double two[] = {0.0, 1.0};
  EXPECT_EQ(ops::nearest_center(0.5, two, 2), 0);
  const double unsorted[] = {1.0, -1.0, 0.0};
  EXPECT_EQ(ops::nearest_center(-0.9, unsorted, 3), 1);
}

TEST(Quantizer, ForwardMatchesBruteForce) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-1.5, 1.5);
  std::vector<double> centers(8);
  for (double& c : centers) c = d(rng);
  std::vector<double> ys(20000);
  for (double& y : ys) y = d(rng);
  // Exact midpoints between dyadic centers produce genuine ties.
  const std::vector<double> grid{-1.0, -0.5, 0.0, 0.25, 0.5, 1.0};
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) ys.push_back((grid[i] + grid[i + 1]) / 2);
  Tensor c(Shape{1, 8, 1, 1}, centers);
  Tensor y(Shape{1, 1, 1, static_cast<int>(ys.size())}, ys);
  const Tensor q = ops::quantize_straight_through(y, c, 1.0);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    ASSERT_EQ(q.values()[i], centers[brute_force_nearest(ys[i], centers)]);
  }
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double mid = (grid[i] + grid[i + 1]) / 2;
    EXPECT_EQ(ops::nearest_center(mid, grid.data(), static_cast<int>(grid.size())),
              static_cast<int>(i));
  }
}

TEST(Quantizer, BackwardMatchesAnalyticJacobian) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-1.2, 1.2);
  const int levels = 5;
  const double sigma = 1.7;
  std::vector<double> cv(levels);
  for (double& c : cv) c = d(rng);
  std::vector<double> yv(40);
  for (double& y : yv) y = d(rng);
  Tensor c(Shape{1, levels, 1, 1}, cv);
  Tensor y(Shape{1, 2, 4, 5}, yv);
  c.set_requires_grad(true);
  y.set_requires_grad(true);
  ops::sum(ops::quantize_straight_through(y, c, sigma)).backward();
  std::vector<double> want_c(levels, 0.0);
  for (std::size_t i = 0; i < yv.size(); ++i) {
    std::vector<double> p(levels);
    double total = 0.0;
    for (int j = 0; j < levels; ++j) {
      p[j] = std::exp(-sigma * (yv[i] - cv[j]) * (yv[i] - cv[j]));
      total += p[j];
    }
    double mix = 0.0, mean_g = 0.0;
    for (int j = 0; j < levels; ++j) {
      p[j] /= total;
      mix += p[j] * cv[j];
      mean_g += p[j] * (-2.0 * sigma * (yv[i] - cv[j]));
    }
    double dy = 0.0;
    for (int j = 0; j < levels; ++j) {
      dy += cv[j] * p[j] * (-2.0 * sigma * (yv[i] - cv[j]) - mean_g);
      want_c[j] += p[j] + 2.0 * sigma * (yv[i] - cv[j]) * p[j] * (cv[j] - mix);
    }
    EXPECT_NEAR(y.grad()[i], dy, 1e-5);
  }
  for (int j = 0; j < levels; ++j) EXPECT_NEAR(c.grad()[j], want_c[j], 1e-5);
}

TEST(Codebook, QuantizeDequantizeIdempotent) {
  nn::ParamStore store;
  Codebook cb(store, "codebook", 8);
  std::mt19937_64 rng(3);
  LatentGrid z(3, 2, 5);
  for (auto& i : z.indices) i = static_cast<std::uint8_t>(rng() % 8);
  EXPECT_EQ(cb.quantize(cb.dequantize(z)), z);
  EXPECT_EQ(cb.centers().values()[0], -1.0);
  EXPECT_EQ(cb.centers().values()[7], 1.0);
  z.indices[0] = 9;
  EXPECT_THROW(cb.dequantize(z), InvalidArgument);
}

TEST(Codebook, NonFiniteActivationIsNumericError) {
  nn::ParamStore store;
  Codebook cb(store, "codebook", 4);
  Tensor y(Shape{2, 1, 1, 2}, std::vector<double>{0, 0, 0, NAN});
  EXPECT_NO_THROW(cb.quantize(y, 0));
  try {
    cb.quantize(y, 1);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_EQ(e.batch_index(), 1);
  }
}

TEST(CodecConfig, Validation) {
  CodecConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.c1, 32);
  EXPECT_EQ(c.c2, 10);
  EXPECT_EQ(c.c3, 32);
  EXPECT_EQ(c.downsample_factor, 16);
  c.downsample_factor = 12;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.codebook_size = 1;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_EQ(parse_ablation("no_menet"), Ablation::kNoMenet);
  EXPECT_THROW(parse_ablation("bogus"), InvalidArgument);
}

TEST(CodecNet, IFrameShapesAndDeterminism) {
  CodecConfig cfg;
  cfg.c1 = 8;
  cfg.residual_blocks = 1;
  Model model(cfg, 1);
  std::mt19937_64 rng(4);
  const Tensor x = to_tensor(test::random_frame(64, 64, rng));
  NoGradGuard guard;
  const Tensor y = model.encode_iframe(x, inference_norm()).y;
  EXPECT_EQ(y.shape(), (Shape{1, 10, 4, 4}));
  const Tensor y2 = model.encode_iframe(x, inference_norm()).y;
  EXPECT_TRUE(std::equal(y.values().begin(), y.values().end(), y2.values().begin()));
  const Tensor zq = model.codebook().dequantize(model.codebook().quantize(y));
  EXPECT_EQ(model.decode_iframe(zq, inference_norm()).recon.shape(), x.shape());
  EXPECT_THROW(model.encode_iframe(Tensor(Shape{1, 3, 48, 40}), inference_norm()),
               InvalidArgument);
}

TEST(CodecNet, PFrameShapes) {
  Model model(small_config(), 2);
  std::mt19937_64 rng(5);
  const Tensor x = to_tensor(test::random_frame(64, 64, rng));
  const Tensor prev = to_tensor(test::random_frame(64, 64, rng));
  NoGradGuard guard;
  const RecurrentState s0 = model.initial_state(1, 64, 64);
  EXPECT_EQ(s0.h.shape(), (Shape{1, 8, 4, 4}));
  const EncodedFrame e = model.encode_pframe(x, prev, prev, s0, inference_norm());
  EXPECT_EQ(e.y.shape(), (Shape{1, 4, 4, 4}));
  EXPECT_EQ(e.flow.shape(), (Shape{1, 2, 64, 64}));
  const Tensor zq = model.codebook().dequantize(model.codebook().quantize(e.y));
  const DecodedFrame d = model.decode_pframe(zq, prev, s0, inference_norm());
  EXPECT_EQ(d.flow_hat.shape(), (Shape{1, 2, 64, 64}));
  EXPECT_EQ(d.residual.shape(), (Shape{1, 3, 64, 64}));
  EXPECT_EQ(d.state.h.shape(), (Shape{1, 8, 4, 4}));
  const DecodedFrame d2 = model.decode_pframe(zq, prev, s0, inference_norm());
  EXPECT_TRUE(std::equal(d.recon.values().begin(), d.recon.values().end(),
                         d2.recon.values().begin()));
}

// The P-frame encoder consumes exactly x, warp(prev_recon, f), f and the
// feedback state; the ablations shrink that surface.
TEST(CodecNet, EncoderInputSurfacePerAblation) {
  CodecConfig cfg = small_config();
  Model full(cfg, 3);
  EXPECT_EQ(full.pframe_encoder().in_channels(), 3 + 3 + 2);
  EXPECT_EQ(full.pframe_encoder().feedback_channels(), cfg.c3);
  cfg.ablation = Ablation::kNoFeedback;
  Model no_feedback(cfg, 3);
  EXPECT_EQ(no_feedback.pframe_encoder().in_channels(), 8);
  EXPECT_EQ(no_feedback.pframe_encoder().feedback_channels(), 0);
  cfg.ablation = Ablation::kNoRecurrence;
  Model no_rec(cfg, 3);
  EXPECT_FALSE(no_rec.pframe_decoder().recurrent());
  EXPECT_FALSE(no_rec.initial_state(1, 64, 64).h.defined());
  EXPECT_EQ(no_rec.pframe_encoder().feedback_channels(), 0);
  cfg.ablation = Ablation::kNoMenet;
  Model no_menet(cfg, 3);
  EXPECT_EQ(no_menet.pframe_encoder().in_channels(), 3 + 3);
  EXPECT_EQ(no_menet.pframe_encoder().feedback_channels(), cfg.c3);
  for (const auto& e : no_menet.params().entries()) EXPECT_NE(e.name.rfind("menet", 0), 0u);
}

// Only the arguments of encode_pframe reach the latent: with everything
// else fixed, two different "older" frames cannot be observed.
TEST(CodecNet, MenetReferenceOnlyFeedsFlowEstimator) {
  Model model(small_config(), 4);
  test::perturb_parameters(model, 5, 0.05);
  std::mt19937_64 rng(6);
  const Tensor x = to_tensor(test::random_frame(64, 64, rng));
  const Tensor prev = to_tensor(test::random_frame(64, 64, rng));
  const Tensor other = to_tensor(test::random_frame(64, 64, rng));
  NoGradGuard guard;
  const RecurrentState s0 = model.initial_state(1, 64, 64);
  const EncodedFrame a = model.encode_pframe(x, prev, prev, s0, inference_norm());
  const EncodedFrame b = model.encode_pframe(x, prev, other, s0, inference_norm());
  EXPECT_FALSE(std::equal(a.flow.values().begin(), a.flow.values().end(), b.flow.values().begin()));
}

TEST(CodecNet, ReconstructExamples) {
  std::mt19937_64 rng(7);
  const Frame prev = test::random_frame(16, 16, rng);
  const Frame x = test::random_frame(16, 16, rng);
  EXPECT_EQ(reconstruct(FlowField(16, 16), prev, Frame(16, 16)), prev);
  Frame residual(16, 16);
  for (std::size_t i = 0; i < residual.data().size(); ++i) {
    residual.data()[i] = x.data()[i] - prev.data()[i];
  }
  const Frame r = reconstruct(FlowField(16, 16), prev, residual);
  for (std::size_t i = 0; i < r.data().size(); ++i) EXPECT_NEAR(r.data()[i], x.data()[i], 1e-15);
  FlowField shift(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int c = 0; c < 16; ++c) shift.at(0, y, c) = 2.0;
  }
  const Frame s = reconstruct(shift, prev, Frame(16, 16));
  for (int ch = 0; ch < 3; ++ch) {
    for (int y = 0; y < 16; ++y) {
      for (int c = 0; c < 14; ++c) EXPECT_EQ(s.at(ch, y, c), prev.at(ch, y, c + 2));
    }
  }
}

TEST(Normalization, FreezeBoundary) {
  EXPECT_TRUE(set_normalization_mode(39999).use_batch_stats);
  EXPECT_FALSE(set_normalization_mode(40000).use_batch_stats);
  EXPECT_TRUE(set_normalization_mode(99, 100).use_batch_stats);
  EXPECT_FALSE(set_normalization_mode(100, 100).use_batch_stats);
}

TEST(Normalization, FrozenStatisticsIgnoreBatchComposition) {
  Model model(small_config(), 8);
  std::mt19937_64 rng(9);
  const Frame a = test::random_frame(64, 64, rng);
  const Frame b = test::random_frame(64, 64, rng);
  NoGradGuard guard;
  const nn::NormContext frozen{true, false};
  const Tensor alone = model.encode_iframe(to_tensor(a), frozen).y;
  const std::vector<Frame> pair{a, b};
  const Tensor batched = model.encode_iframe(to_batch<3, FrameTag>(pair), frozen).y;
  EXPECT_TRUE(std::equal(alone.values().begin(), alone.values().end(), batched.values().begin()));
  const nn::NormContext training{true, true};
  const Tensor t_alone = model.encode_iframe(to_tensor(a), training).y;
  const Tensor t_batched = model.encode_iframe(to_batch<3, FrameTag>(pair), training).y;
  EXPECT_FALSE(std::equal(t_alone.values().begin(), t_alone.values().end(),
                          t_batched.values().begin()));
}

TEST(Model, CanonicalizeKeepsCodedDistribution) {
  Model model(small_config(), 10);
  test::perturb_parameters(model, 11, 0.1);
  Tensor centers = model.codebook().centers();
  std::vector<double> shuffled(centers.values().begin(), centers.values().end());
  std::swap(shuffled[1], shuffled[6]);
  std::swap(shuffled[0], shuffled[3]);
  std::copy(shuffled.begin(), shuffled.end(), centers.mutable_values().begin());
  LatentGrid z(4, 3, 3);
  std::mt19937_64 rng(12);
  for (auto& i : z.indices) i = static_cast<std::uint8_t>(rng() % 8);
  const double before = frame_rate(z, model.prior(FrameType::kP), model.codebook()).total_bits;
  const Tensor values = model.codebook().dequantize(z);
  model.canonicalize_codebook();
  const auto& c = model.codebook().centers().values();
  EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
  const LatentGrid z2 = model.codebook().quantize(values);
  const double after = frame_rate(z2, model.prior(FrameType::kP), model.codebook()).total_bits;
  EXPECT_NEAR(before, after, 1e-9);
}

TEST(Model, CheckpointRoundTrip) {
  Model model(small_config(), 13);
  test::perturb_parameters(model, 14, 0.1);
  model.iteration = 1234;
  model.norm_frozen = true;
  const auto path = std::filesystem::temp_directory_path() / "frae_ckpt_test.frck";
  save_checkpoint(model, path);
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(model_hash(*loaded), model_hash(model));
  EXPECT_EQ(loaded->iteration, 1234);
  EXPECT_TRUE(loaded->norm_frozen);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "FRCKjunk";
  }
  EXPECT_THROW(load_checkpoint(path), ModelError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Model, GradientReachesMenetFromRateDistortionLoss) {
  Model model(small_config(), 15);
  test::perturb_parameters(model, 16, 0.05);
  std::mt19937_64 rng(17);
  const Tensor x = to_tensor(test::random_frame(64, 64, rng));
  const Tensor prev = to_tensor(test::random_frame(64, 64, rng));
  const nn::NormContext norm{true, true};
  const RecurrentState s0 = model.initial_state(1, 64, 64);
  const EncodedFrame e = model.encode_pframe(x, prev, prev, s0, norm);
  const Tensor zq = ops::quantize_straight_through(e.y, model.codebook().centers(), 1.0);
  const DecodedFrame d = model.decode_pframe(zq, prev, s0, norm);
  ops::mean(ops::square(ops::sub(d.recon, x))).backward();
  double norm2 = 0.0;
  for (const Tensor& p : model.params().trainable("menet")) {
    for (double g : p.grad()) norm2 += g * g;
  }
  EXPECT_GT(norm2, 0.0);
}

}  // namespace
}  // namespace frae
