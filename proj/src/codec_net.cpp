#include "frae/codec_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "frae/error.hpp"
#include "frae/motion.hpp"
#include "frae/ops.hpp"

namespace frae {

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kNoFeedback: return "no_feedback";
    case Ablation::kNoRecurrence: return "no_recurrence";
    case Ablation::kNoMenet: return "no_menet";
  }
  return "none";
}

Ablation parse_ablation(std::string_view s) {
  for (Ablation a : {Ablation::kNone, Ablation::kNoFeedback,
                     Ablation::kNoRecurrence, Ablation::kNoMenet}) {
    if (s == to_string(a)) return a;
  }
  throw InvalidArgument("unknown ablation '" + std::string(s) +
                        "' (none, no_feedback, no_recurrence, no_menet)");
}

void CodecConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw InvalidArgument(std::string(name) + " must be positive");
  };
  positive(c1, "c1");
  positive(c2, "c2");
  positive(c3, "c3");
  positive(prior_width, "prior_width");
  positive(prior_layers, "prior_layers");
  positive(prior_head_hidden, "prior_head_hidden");
  if (residual_blocks < 0) throw InvalidArgument("residual_blocks must be >= 0");
  if (downsample_factor < 8 || (downsample_factor & (downsample_factor - 1)) != 0) {
    throw InvalidArgument("downsample_factor must be a power of 2 and at least 8");
  }
  if (codebook_size < 2 || codebook_size > 256) {
    throw InvalidArgument("codebook_size must be in [2, 256]");
  }
  if (gru_kernel < 1 || gru_kernel % 2 == 0) throw InvalidArgument("gru_kernel must be odd");
  if (prior_kernel < 3 || prior_kernel % 2 == 0) throw InvalidArgument("prior_kernel must be odd and >= 3");
  if (!(softmax_sigma > 0.0)) throw InvalidArgument("softmax_sigma must be positive");
  MENetConfig{menet_width, menet_levels}.validate();
}

int CodecConfig::stride_stages() const {
  int k = 0;
  while ((1 << k) < downsample_factor) ++k;
  return k;
}

int CodecConfig::frame_divisor() const {
  const int menet = uses_menet() ? (1 << menet_levels) : 1;
  return std::max(downsample_factor, menet);
}

Codebook::Codebook(nn::ParamStore& store, const std::string& prefix,
                   int levels) {
  std::vector<double> init(levels);
  for (int j = 0; j < levels; ++j) init[j] = -1.0 + 2.0 * j / (levels - 1);
  centers_ = store.add(prefix + ".centers", Shape{1, levels, 1, 1}, init);
}

LatentGrid Codebook::quantize(const Tensor& y, int item) const {
  const Shape s = y.shape();
  if (item < 0 || item >= s.n) throw InvalidArgument("quantize: batch index out of range");
  LatentGrid z(s.c, s.h, s.w);
  const double* cv = centers_.values().data();
  const std::size_t base = static_cast<std::size_t>(item) * s.c * s.plane();
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double v = y.values()[base + i];
    if (!std::isfinite(v)) throw NumericError(item, "non-finite latent activation");
    z.indices[i] = static_cast<std::uint8_t>(ops::nearest_center(v, cv, size()));
  }
  return z;
}

Tensor Codebook::dequantize(const LatentGrid& z) const {
  return dequantize(std::vector<LatentGrid>{z});
}

Tensor Codebook::dequantize(const std::vector<LatentGrid>& zs) const {
  if (zs.empty()) throw InvalidArgument("dequantize: no latents");
  const LatentGrid& f = zs.front();
  std::vector<double> v;
  v.reserve(zs.size() * f.size());
  for (const LatentGrid& z : zs) {
    if (z.channels != f.channels || z.height != f.height || z.width != f.width) {
      throw InvalidArgument("dequantize: latent grids differ in shape");
    }
    for (std::uint8_t i : z.indices) {
      if (i >= size()) throw InvalidArgument("latent index " + std::to_string(i) + " outside codebook");
      v.push_back(centers_.values()[i]);
    }
  }
  return Tensor(Shape{static_cast<int>(zs.size()), f.channels, f.height, f.width}, std::move(v));
}

std::vector<int> Codebook::sorting_permutation() const {
  std::vector<int> perm(size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [this](int a, int b) {
    return centers_.values()[a] < centers_.values()[b];
  });
  return perm;
}

NormMode set_normalization_mode(long iteration, long freeze_at) {
  return {iteration < freeze_at};
}

namespace {

Tensor stage(const Tensor& x, const nn::Conv2d& conv, const nn::BatchNorm2d& bn,
             bool batchnorm, const nn::NormContext& norm) {
  Tensor t = conv(x);
  if (batchnorm && norm.enabled) t = bn(t, norm.use_batch_stats);
  return ops::relu(t);
}

Tensor stage(const Tensor& x, const nn::ConvTranspose2d& conv,
             const nn::BatchNorm2d& bn, bool batchnorm,
             const nn::NormContext& norm) {
  Tensor t = conv(x);
  if (batchnorm && norm.enabled) t = bn(t, norm.use_batch_stats);
  return ops::relu(t);
}

}  // namespace

FrameEncoder::FrameEncoder(nn::ParamStore& store, const std::string& prefix,
                           const CodecConfig& cfg, int in_channels,
                           int feedback_channels, nn::Rng& rng)
    : batchnorm_(cfg.batchnorm), in_channels_(in_channels),
      feedback_channels_(feedback_channels) {
  const int k = cfg.stride_stages();
  int in = in_channels;
  for (int i = 0; i < 2; ++i) {
    const std::string p = prefix + ".down" + std::to_string(i);
    Stage s{nn::Conv2d(store, p, in, cfg.c1, 5, 2, rng), {}};
    if (batchnorm_) s.bn = nn::BatchNorm2d(store, p + ".bn", cfg.c1);
    head_stages_.push_back(std::move(s));
    in = cfg.c1;
  }
  for (int b = 0; b < cfg.residual_blocks; ++b) {
    blocks_.emplace_back(store, prefix + ".res" + std::to_string(b), cfg.c1,
                         batchnorm_, rng);
  }
  for (int i = 2; i < k; ++i) {
    const std::string p = prefix + ".down" + std::to_string(i);
    Stage s{nn::Conv2d(store, p, cfg.c1, cfg.c1, 5, 2, rng), {}};
    if (batchnorm_) s.bn = nn::BatchNorm2d(store, p + ".bn", cfg.c1);
    tail_stages_.push_back(std::move(s));
  }
  out_ = nn::Conv2d(store, prefix + ".out", cfg.c1 + feedback_channels, cfg.c2, 3, 1, rng);
}

Tensor FrameEncoder::operator()(const Tensor& x, const Tensor& feedback,
                                const nn::NormContext& norm) const {
  if (x.shape().c != in_channels_) {
    throw InvalidArgument("encoder expects " + std::to_string(in_channels_) +
                          " input channels, got " + x.shape().str());
  }
  Tensor t = x;
  for (const Stage& s : head_stages_) t = stage(t, s.conv, s.bn, batchnorm_, norm);
  for (const nn::ResidualBlock& b : blocks_) t = b(t, norm);
  for (const Stage& s : tail_stages_) t = stage(t, s.conv, s.bn, batchnorm_, norm);
  if (feedback_channels_ > 0) {
    if (!feedback.defined() || feedback.shape().c != feedback_channels_) {
      throw InvalidArgument("encoder feedback state missing or mis-shaped");
    }
    t = ops::concat_channels({t, feedback});
  }
  return out_(t);
}

FrameDecoderTrunk::FrameDecoderTrunk(nn::ParamStore& store,
                                     const std::string& prefix,
                                     const CodecConfig& cfg, int in_channels,
                                     nn::Rng& rng)
    : batchnorm_(cfg.batchnorm) {
  const int k = cfg.stride_stages();
  int in = in_channels;
  for (int i = 0; i < k - 2; ++i) {
    const std::string p = prefix + ".up" + std::to_string(i);
    Stage s{nn::ConvTranspose2d(store, p, in, cfg.c1, 5, 2, rng), {}};
    if (batchnorm_) s.bn = nn::BatchNorm2d(store, p + ".bn", cfg.c1);
    head_stages_.push_back(std::move(s));
    in = cfg.c1;
  }
  for (int b = 0; b < cfg.residual_blocks; ++b) {
    blocks_.emplace_back(store, prefix + ".res" + std::to_string(b), cfg.c1,
                         batchnorm_, rng);
  }
  const std::string p = prefix + ".up" + std::to_string(k - 2);
  Stage s{nn::ConvTranspose2d(store, p, cfg.c1, cfg.c1, 5, 2, rng), {}};
  if (batchnorm_) s.bn = nn::BatchNorm2d(store, p + ".bn", cfg.c1);
  tail_stages_.push_back(std::move(s));
}

Tensor FrameDecoderTrunk::operator()(const Tensor& x,
                                     const nn::NormContext& norm) const {
  Tensor t = x;
  for (const Stage& s : head_stages_) t = stage(t, s.conv, s.bn, batchnorm_, norm);
  for (const nn::ResidualBlock& b : blocks_) t = b(t, norm);
  for (const Stage& s : tail_stages_) t = stage(t, s.conv, s.bn, batchnorm_, norm);
  return t;
}

IFrameDecoder::IFrameDecoder(nn::ParamStore& store, const std::string& prefix,
                             const CodecConfig& cfg, nn::Rng& rng)
    : in_(store, prefix + ".in", cfg.c2, cfg.c1, 3, 1, rng),
      trunk_(store, prefix + ".trunk", cfg, cfg.c1, rng),
      out_(store, prefix + ".out", cfg.c1, 3, 5, 2, rng),
      batchnorm_(cfg.batchnorm) {
  if (batchnorm_) in_bn_ = nn::BatchNorm2d(store, prefix + ".in.bn", cfg.c1);
}

Tensor IFrameDecoder::operator()(const Tensor& z,
                                 const nn::NormContext& norm) const {
  const Tensor t = stage(z, in_, in_bn_, batchnorm_, norm);
  return ops::add_scalar(out_(trunk_(t, norm)), 0.5);
}

PFrameDecoder::PFrameDecoder(nn::ParamStore& store, const std::string& prefix,
                             const CodecConfig& cfg, nn::Rng& rng)
    : in_(store, prefix + ".in", cfg.c2, cfg.c1, 3, 1, rng),
      batchnorm_(cfg.batchnorm), recurrent_(cfg.uses_recurrence()) {
  if (batchnorm_) in_bn_ = nn::BatchNorm2d(store, prefix + ".in.bn", cfg.c1);
  if (recurrent_) gru_ = nn::ConvGru(store, prefix + ".gru", cfg.c1, cfg.c3, cfg.gru_kernel, rng);
  trunk_ = FrameDecoderTrunk(store, prefix + ".trunk", cfg,
                             recurrent_ ? cfg.c3 : cfg.c1, rng);
  flow_head_ = nn::ConvTranspose2d(store, prefix + ".flow", cfg.c1, 2, 5, 2,
                                   rng, /*zero_init=*/true);
  residual_head_ = nn::ConvTranspose2d(store, prefix + ".residual", cfg.c1, 3, 5, 2, rng);
}

PFrameDecoderOutput PFrameDecoder::operator()(const Tensor& z,
                                              const RecurrentState& prev,
                                              const nn::NormContext& norm) const {
  Tensor t = stage(z, in_, in_bn_, batchnorm_, norm);
  PFrameDecoderOutput out;
  if (recurrent_) {
    if (!prev.h.defined() || prev.h.shape().n != t.shape().n ||
        prev.h.shape().h != t.shape().h || prev.h.shape().w != t.shape().w ||
        prev.h.shape().c != gru_.hidden()) {
      throw InvalidArgument("recurrent state does not match the latent grid");
    }
    out.state.h = gru_(t, prev.h);
    t = out.state.h;
  }
  const Tensor features = trunk_(t, norm);
  out.flow = flow_head_(features);
  out.residual = residual_head_(features);
  return out;
}

Tensor reconstruct(const Tensor& f_hat, const Tensor& prev_recon,
                   const Tensor& r_hat) {
  return ops::clamp_straight_through(
      ops::add(ops::warp(prev_recon, f_hat), r_hat), 0.0, 1.0);
}

Frame reconstruct(const FlowField& f_hat, const Frame& prev_recon,
                  const Frame& r_hat) {
  NoGradGuard guard;
  return image_from_tensor<Frame>(
      reconstruct(to_tensor(f_hat), to_tensor(prev_recon), to_tensor(r_hat)));
}

}  // namespace frae
