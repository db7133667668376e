#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "frae/image.hpp"
#include "frae/ops.hpp"

namespace frae {

enum class Padding { kValid, kReplicate };

std::string_view to_string(Padding p);
Padding parse_padding(std::string_view s);

struct MsSsimConfig {
  int window_size = 11;
  double sigma = 1.5;
  /// Per-scale exponents, finest scale first.
  std::vector<double> weights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  Padding padding = Padding::kValid;
  double k1 = 0.01;
  double k2 = 0.03;

  int scale_count() const { return static_cast<int>(weights.size()); }
  /// Smallest image side the pyramid supports.
  int min_extent() const { return window_size << (scale_count() - 1); }
  /// Throws InvalidArgument unless the window is odd and the weights are
  /// positive and sum to 1 (the published five-scale weights sum to 1.0001,
  /// so a 1e-3 tolerance applies).
  void validate() const;

  /// The first `scales` default weights, renormalised to sum to 1.
  static MsSsimConfig truncated(int scales, Padding padding);
  /// Largest scale count whose pyramid fits an image of the given size.
  int max_feasible_scales(int height, int width) const;
};

enum class Metric { kMsSsim, kPsnr };

struct DistortionScore {
  Metric metric = Metric::kMsSsim;
  double value = 0.0;  // MS-SSIM in [-1, 1], or PSNR in dB
};

/// Gaussian window taps, normalised to sum to 1.
std::vector<double> gaussian_taps(int size, double sigma);

/// Differentiable MS-SSIM of two (n,c,h,w) tensors. Channel scores are
/// averaged; the result has shape (n,1,1,1).
Tensor ms_ssim(const Tensor& a, const Tensor& b, const MsSsimConfig& cfg);
DistortionScore ms_ssim(const Frame& a, const Frame& b, const MsSsimConfig& cfg);

/// Differentiable PSNR over all elements of two equally shaped tensors.
Tensor psnr(const Tensor& a, const Tensor& b);
/// 10 log10(1 / MSE); +infinity for identical inputs.
DistortionScore psnr(const Frame& a, const Frame& b);

double bits_per_pixel(std::uint64_t total_bits, int height, int width,
                      int frame_count);

/// Default shaded band in rate-distortion plots: the streaming range.
inline constexpr double kStreamingBandLow = 0.09;
inline constexpr double kStreamingBandHigh = 0.13;

}  // namespace frae
