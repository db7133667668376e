#include "frae/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "frae/error.hpp"

namespace frae {

std::string_view to_string(Padding p) {
  return p == Padding::kValid ? "valid" : "replicate";
}

Padding parse_padding(std::string_view s) {
  if (s == "valid") return Padding::kValid;
  if (s == "replicate") return Padding::kReplicate;
  throw InvalidArgument("padding must be 'valid' or 'replicate', got '" +
                        std::string(s) + "'");
}

void MsSsimConfig::validate() const {
  if (window_size < 1 || window_size % 2 == 0) {
    throw InvalidArgument("MS-SSIM window size must be odd");
  }
  if (weights.empty()) throw InvalidArgument("MS-SSIM needs at least one scale");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw InvalidArgument("MS-SSIM weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-3) {
    throw InvalidArgument("MS-SSIM weights must sum to 1, got " + std::to_string(total));
  }
}

MsSsimConfig MsSsimConfig::truncated(int scales, Padding padding) {
  MsSsimConfig cfg;
  if (scales < 1 || scales > cfg.scale_count()) {
    throw InvalidArgument("MS-SSIM scale count must be in [1, 5]");
  }
  cfg.weights.resize(scales);
  const double total = std::accumulate(cfg.weights.begin(), cfg.weights.end(), 0.0);
  for (double& w : cfg.weights) w /= total;
  cfg.padding = padding;
  return cfg;
}

int MsSsimConfig::max_feasible_scales(int height, int width) const {
  int scales = 0;
  while (scales < 16 && (window_size << scales) <= std::min(height, width)) ++scales;
  return scales;
}

std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> taps(size);
  const int r = size / 2;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - r;
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

Tensor ms_ssim(const Tensor& a, const Tensor& b, const MsSsimConfig& cfg) {
  cfg.validate();
  if (a.shape() != b.shape()) {
    throw InvalidArgument("ms_ssim: shape mismatch " + a.shape().str() +
                          " vs " + b.shape().str());
  }
  const Shape s = a.shape();
  if (std::min(s.h, s.w) < cfg.min_extent()) {
    throw InvalidArgument(
        "ms_ssim: " + std::to_string(s.w) + "x" + std::to_string(s.h) +
        " is too small for " + std::to_string(cfg.scale_count()) +
        " scales; at most " +
        std::to_string(cfg.max_feasible_scales(s.h, s.w)) + " are feasible");
  }
  const std::vector<double> taps = gaussian_taps(cfg.window_size, cfg.sigma);
  const auto pad = cfg.padding == Padding::kValid ? ops::BlurPadding::kValid
                                                  : ops::BlurPadding::kReplicate;
  const double c1 = cfg.k1 * cfg.k1;
  const double c2 = cfg.k2 * cfg.k2;
  auto blur = [&](const Tensor& t) { return ops::separable_blur(t, taps, pad); };

  Tensor x = a;
  Tensor y = b;
  Tensor score;  // (n,c,1,1) running product
  for (int scale = 0; scale < cfg.scale_count(); ++scale) {
    const Tensor mx = blur(x);
    const Tensor my = blur(y);
    const Tensor mxx = ops::mul(mx, mx);
    const Tensor myy = ops::mul(my, my);
    const Tensor mxy = ops::mul(mx, my);
    const Tensor sxx = ops::sub(blur(ops::mul(x, x)), mxx);
    const Tensor syy = ops::sub(blur(ops::mul(y, y)), myy);
    const Tensor sxy = ops::sub(blur(ops::mul(x, y)), mxy);
    const Tensor cs = ops::div(ops::add_scalar(ops::add(sxy, sxy), c2),
                               ops::add_scalar(ops::add(sxx, syy), c2));
    const bool last = scale + 1 == cfg.scale_count();
    Tensor map = cs;
    if (last) {
      const Tensor lum = ops::div(ops::add_scalar(ops::add(mxy, mxy), c1),
                                  ops::add_scalar(ops::add(mxx, myy), c1));
      map = ops::mul(lum, cs);
    }
    const Tensor term =
        ops::pow_scalar(ops::relu(ops::spatial_mean(map)), cfg.weights[scale]);
    score = score.defined() ? ops::mul(score, term) : term;
    if (!last) {
      x = ops::avg_pool2(x);
      y = ops::avg_pool2(y);
    }
  }
  return ops::channel_mean(score);
}

DistortionScore ms_ssim(const Frame& a, const Frame& b, const MsSsimConfig& cfg) {
  NoGradGuard guard;
  return {Metric::kMsSsim, ms_ssim(to_tensor(a), to_tensor(b), cfg).item()};
}

Tensor psnr(const Tensor& a, const Tensor& b) {
  const Tensor mse = ops::mean(ops::square(ops::sub(a, b)));
  return ops::mul_scalar(ops::log(mse), -10.0 / std::log(10.0));
}

DistortionScore psnr(const Frame& a, const Frame& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw InvalidArgument("psnr: shape mismatch");
  }
  double se = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    se += d * d;
  }
  if (se == 0.0) return {Metric::kPsnr, std::numeric_limits<double>::infinity()};
  const double mse = se / static_cast<double>(a.data().size());
  return {Metric::kPsnr, 10.0 * std::log10(1.0 / mse)};
}

double bits_per_pixel(std::uint64_t total_bits, int height, int width,
                      int frame_count) {
  if (height <= 0 || width <= 0 || frame_count <= 0) {
    throw InvalidArgument("bits_per_pixel: dimensions must be positive");
  }
  return static_cast<double>(total_bits) /
         (static_cast<double>(height) * width * frame_count);
}

}  // namespace frae
