#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "frae/error.hpp"
#include "frae/ops.hpp"
#include "gradcheck.hpp"

namespace frae {
namespace {

using test::gradcheck;
using test::random_tensor;
using Inputs = std::vector<Tensor>;

constexpr double kTol = 1e-6;

TEST(OpsGrad, Elementwise) {
  std::mt19937_64 rng(1);
  const Shape s{2, 3, 4, 5};
  Tensor a = random_tensor(s, rng);
  Tensor b = random_tensor(s, rng, 0.5, 2.0);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::add(v[0], v[1]); }, {a, b}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::sub(v[0], v[1]); }, {a, b}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::mul(v[0], v[1]); }, {a, b}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::div(v[0], v[1]); }, {a, b}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::log(v[0]); }, {b}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::pow_scalar(v[0], 1.7); }, {b}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::square(v[0]); }, {a}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::sigmoid(v[0]); }, {a}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::tanh(v[0]); }, {a}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::rsub_scalar(2.0, ops::mul_scalar(ops::add_scalar(v[0], 1.0), 3.0)); }, {a}), kTol);
}

TEST(OpsGrad, ReductionsAndLayout) {
  std::mt19937_64 rng(2);
  Tensor a = random_tensor({2, 3, 4, 5}, rng);
  Tensor b = random_tensor({2, 2, 4, 5}, rng);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::sum(v[0]); }, {a}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::mean(v[0]); }, {a}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::spatial_mean(v[0]); }, {a}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::channel_mean(v[0]); }, {a}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::concat_channels({v[0], v[1]}); }, {a, b}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::slice_channels(v[0], 1, 2); }, {a}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::slice_batch(v[0], 1); }, {a}), kTol);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::crop(v[0], 1, 2, 2, 3); }, {a}), kTol);
}

TEST(OpsGrad, Convolutions) {
  std::mt19937_64 rng(3);
  Tensor x = random_tensor({2, 3, 7, 6}, rng);
  Tensor w = random_tensor({4, 3, 3, 3}, rng);
  Tensor b = random_tensor({4, 1, 1, 1}, rng);
  for (int stride : {1, 2}) {
    EXPECT_LT(gradcheck([stride](const Inputs& v) { return ops::conv2d(v[0], v[1], v[2], stride, 1); }, {x, w, b}), kTol);
  }
  Tensor w5 = random_tensor({4, 3, 5, 5}, rng);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::conv2d(v[0], v[1], Tensor(), 2, 2); }, {x, w5}), kTol);
  Tensor wt = random_tensor({3, 2, 5, 5}, rng);
  Tensor bt = random_tensor({2, 1, 1, 1}, rng);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::conv_transpose2d(v[0], v[1], v[2], 2, 2, 1); }, {x, wt, bt}), kTol);
  Tensor wt4 = random_tensor({3, 2, 4, 4}, rng);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::conv_transpose2d(v[0], v[1], Tensor(), 2, 1, 0); }, {x, wt4}), kTol);
}

TEST(OpsGrad, ConvTransposeIsAdjointOfConv) {
  std::mt19937_64 rng(4);
  NoGradGuard g;
  Tensor x = random_tensor({1, 3, 8, 8}, rng);
  Tensor w = random_tensor({2, 3, 5, 5}, rng);
  Tensor y = random_tensor({1, 2, 4, 4}, rng);
  // <conv(x), y> == <x, conv^T(y)> with the same weights.
  const Tensor cx = ops::conv2d(x, w, Tensor(), 2, 2);
  const Tensor ty = ops::conv_transpose2d(y, w, Tensor(), 2, 2, 1);
  ASSERT_EQ(cx.shape(), y.shape());
  ASSERT_EQ(ty.shape(), x.shape());
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < y.numel(); ++i) lhs += cx.values()[i] * y.values()[i];
  for (std::size_t i = 0; i < x.numel(); ++i) rhs += x.values()[i] * ty.values()[i];
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(OpsGrad, ConvMatchesDirectSum) {
  std::mt19937_64 rng(5);
  NoGradGuard g;
  Tensor x = random_tensor({1, 2, 5, 6}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Tensor b = random_tensor({3, 1, 1, 1}, rng);
  const Tensor y = ops::conv2d(x, w, b, 2, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 3, 3, 3}));
  for (int o = 0; o < 3; ++o) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double s = b.values()[o];
        for (int c = 0; c < 2; ++c) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const int yy = 2 * i - 1 + ky, xx = 2 * j - 1 + kx;
              if (yy < 0 || yy >= 5 || xx < 0 || xx >= 6) continue;
              s += w.at(o, c, ky, kx) * x.at(0, c, yy, xx);
            }
          }
        }
        EXPECT_NEAR(y.at(0, o, i, j), s, 1e-12);
      }
    }
  }
}

TEST(OpsGrad, MaskedConv) {
  std::mt19937_64 rng(6);
  Tensor x = random_tensor({1, 2, 4, 5}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Tensor b = random_tensor({3, 1, 1, 1}, rng);
  std::vector<std::uint8_t> mask(w.numel());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = (i * 7 + 3) % 3 != 0;
  EXPECT_LT(gradcheck([&mask](const Inputs& v) { return ops::masked_conv2d(v[0], v[1], v[2], mask); }, {x, w, b}), kTol);
}

TEST(OpsGrad, BatchNormBothModes) {
  std::mt19937_64 rng(7);
  Tensor x = random_tensor({3, 2, 3, 3}, rng);
  Tensor gamma = random_tensor({1, 2, 1, 1}, rng, 0.5, 1.5);
  Tensor beta = random_tensor({1, 2, 1, 1}, rng);
  for (bool batch : {true, false}) {
    ops::BatchNormState st;
    st.running_mean = Tensor({1, 2, 1, 1}, 0.1);
    st.running_var = Tensor({1, 2, 1, 1}, 0.9);
    st.momentum = 0.0;  // keep the running values fixed across evaluations
    EXPECT_LT(gradcheck([&](const Inputs& v) { return ops::batch_norm(v[0], v[1], v[2], st, batch); }, {x, gamma, beta}), 1e-5);
  }
}

TEST(OpsGrad, ImageOps) {
  std::mt19937_64 rng(8);
  Tensor x = random_tensor({1, 2, 9, 7}, rng);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::avg_pool2(v[0]); }, {x}), kTol);
  const std::vector<double> taps{0.1, 0.2, 0.4, 0.2, 0.1};
  for (auto pad : {ops::BlurPadding::kValid, ops::BlurPadding::kReplicate}) {
    EXPECT_LT(gradcheck([&](const Inputs& v) { return ops::separable_blur(v[0], taps, pad); }, {x}), kTol);
  }
}

TEST(OpsGrad, WarpInterior) {
  std::mt19937_64 rng(9);
  Tensor image = random_tensor({1, 2, 6, 6}, rng);
  // Non-integer displacements well inside the frame keep the objective smooth.
  Tensor flow = random_tensor({1, 2, 6, 6}, rng, 0.1, 0.4);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::warp(v[0], v[1]); }, {image, flow}, 7, 1e-7), 1e-5);
}

TEST(OpsGrad, Quantization) {
  std::mt19937_64 rng(10);
  Tensor y = random_tensor({1, 2, 3, 3}, rng, -1.2, 1.2);
  Tensor centers({1, 4, 1, 1}, std::vector<double>{-0.9, -0.2, 0.3, 0.8});
  centers.set_requires_grad(true);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::soft_assignment(v[0], v[1], 1.3); }, {y, centers}), kTol);
  Tensor logits = random_tensor({1, 6, 2, 2}, rng, -3, 3);
  EXPECT_LT(gradcheck([](const Inputs& v) { return ops::log_softmax_groups(v[0], 3); }, {logits}), kTol);
}

TEST(Ops, ClampStraightThrough) {
  Tensor a({1, 1, 1, 3}, std::vector<double>{-0.5, 0.5, 1.5});
  a.set_requires_grad(true);
  Tensor y = ops::clamp_straight_through(a, 0.0, 1.0);
  EXPECT_EQ(y.values()[0], 0.0);
  EXPECT_EQ(y.values()[1], 0.5);
  EXPECT_EQ(y.values()[2], 1.0);
  ops::sum(y).backward();
  for (double g : a.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Ops, ShapeMismatchThrows) {
  Tensor a({1, 1, 2, 2}), b({1, 1, 2, 3});
  EXPECT_THROW(ops::add(a, b), InvalidArgument);
}

TEST(Tensor, NoGradGuardSkipsRecording) {
  Tensor a({1, 1, 1, 1}, 2.0);
  a.set_requires_grad(true);
  NoGradGuard g;
  const Tensor y = ops::mul(a, a);
  EXPECT_FALSE(y.requires_grad());
}

}  // namespace
}  // namespace frae
