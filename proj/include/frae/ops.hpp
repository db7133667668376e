#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "frae/tensor.hpp"

/// Differentiable tensor operations. Binary elementwise ops require equal
/// shapes; there is no implicit broadcasting.
namespace frae::ops {

// Elementwise arithmetic.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor rsub_scalar(double s, const Tensor& a);  // s - a
Tensor square(const Tensor& a);
Tensor log(const Tensor& a);
Tensor abs(const Tensor& a);
/// a^p for a >= 0; the derivative at a == 0 is taken as 0.
Tensor pow_scalar(const Tensor& a, double p);

// Activations.
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
/// Clamps in the forward pass and passes gradients through unchanged.
Tensor clamp_straight_through(const Tensor& a, double lo, double hi);

// Reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Mean over H and W: (n,c,h,w) -> (n,c,1,1).
Tensor spatial_mean(const Tensor& a);
/// Mean over C: (n,c,h,w) -> (n,1,h,w).
Tensor channel_mean(const Tensor& a);

// Layout.
Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor slice_channels(const Tensor& a, int start, int count);
Tensor slice_batch(const Tensor& a, int index);
Tensor crop(const Tensor& a, int top, int left, int height, int width);

// Convolutions. Weights use (out, in, k, k) for conv2d and (in, out, k, k)
// for the transposed variant. `bias` may be an undefined tensor.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride, int pad);
Tensor conv_transpose2d(const Tensor& x, const Tensor& weight,
                        const Tensor& bias, int stride, int pad,
                        int output_pad);

/// Stride-1, same-size convolution that never reads taps whose mask entry
/// is zero. `mask` has one byte per weight element. Masked taps do not
/// contribute to the arithmetic at all, so an output never depends on the
/// values it is masked from (not even through signed zeros).
Tensor masked_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                     std::span<const std::uint8_t> mask);

struct BatchNormState {
  Tensor running_mean;  // (1,c,1,1)
  Tensor running_var;   // (1,c,1,1)
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Batch normalisation over (n,h,w). With `use_batch_stats` the running
/// estimates are updated in place; otherwise they are used as constants.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool use_batch_stats);

/// 2x2 average pooling with floor semantics for odd extents.
Tensor avg_pool2(const Tensor& x);

enum class BlurPadding { kValid, kReplicate };

/// Separable per-channel blur with a symmetric odd-length kernel. Valid
/// padding shrinks each extent by (taps - 1); replicate keeps the size.
Tensor separable_blur(const Tensor& x, std::span<const double> taps,
                      BlurPadding padding);

/// Bilinear backward warp: out[p] = image[p + flow[p]] with sample
/// coordinates clamped to the image border. flow channel 0 is horizontal
/// displacement, channel 1 vertical, both in pixels.
Tensor warp(const Tensor& image, const Tensor& flow);

/// Softmax over negative scaled squared distances to each codebook center:
/// (n,c,h,w) -> (n, c*L, h, w) with channel index c*L + j.
Tensor soft_assignment(const Tensor& y, const Tensor& centers, double sigma);

/// Index of the center closest to `value`; ties go to the lower index.
int nearest_center(double value, const double* centers, int levels);

/// Nearest-center values in the forward pass (ties to the lower index);
/// gradients of the softmax-weighted center mixture in the backward pass.
Tensor quantize_straight_through(const Tensor& y, const Tensor& centers,
                                 double sigma);

/// Log-softmax over consecutive groups of `group` channels.
Tensor log_softmax_groups(const Tensor& x, int group);

}  // namespace frae::ops
