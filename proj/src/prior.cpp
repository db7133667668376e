#include "frae/prior.hpp"

#include <cmath>

#include "frae/error.hpp"
#include "frae/ops.hpp"

namespace frae {

std::string_view to_string(FrameType t) { return t == FrameType::kI ? "I" : "P"; }

namespace {

enum class Tap { kAbove, kAboveOrRow, kLeft, kLeftOrCenter };

// Spatial mask for a k x k kernel replicated over all (out, in) pairs.
std::vector<std::uint8_t> spatial_mask(int out, int in, int k, Tap tap) {
  const int r = k / 2;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(out) * in * k * k);
  for (int o = 0; o < out; ++o) {
    for (int i = 0; i < in; ++i) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          bool on = false;
          switch (tap) {
            case Tap::kAbove: on = ky < r; break;
            case Tap::kAboveOrRow: on = ky <= r; break;
            case Tap::kLeft: on = ky == r && kx < r; break;
            case Tap::kLeftOrCenter: on = ky == r && kx <= r; break;
          }
          mask[((static_cast<std::size_t>(o) * in + i) * k + ky) * k + kx] = on;
        }
      }
    }
  }
  return mask;
}

// 1x1 mask: output unit o (group og = o / out_group) may read context
// inputs [0, ctx) always and latent input channel c (at ctx + c) only when
// c < og (strict) or c <= og (inclusive, for hidden->output links).
std::vector<std::uint8_t> group_mask(int out, int out_group, int ctx,
                                     int groups_in, int in_group, bool strict) {
  const int in = ctx + groups_in * in_group;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(out) * in);
  for (int o = 0; o < out; ++o) {
    const int og = o / out_group;
    for (int i = 0; i < in; ++i) {
      bool on = i < ctx;
      if (!on) {
        const int g = (i - ctx) / in_group;
        on = strict ? g < og : g <= og;
      }
      mask[static_cast<std::size_t>(o) * in + i] = on;
    }
  }
  return mask;
}

Tensor gate(const Tensor& t, int width) {
  return ops::mul(ops::tanh(ops::slice_channels(t, 0, width)),
                  ops::sigmoid(ops::slice_channels(t, width, width)));
}

}  // namespace

PriorModel::PriorModel(nn::ParamStore& store, const std::string& prefix,
                       const CodecConfig& cfg, FrameType type, nn::Rng& rng)
    : type_(type), channels_(cfg.c2), levels_(cfg.codebook_size),
      width_(cfg.prior_width), kernel_(cfg.prior_kernel) {
  const int k = cfg.prior_kernel;
  const int f = width_;
  for (int l = 0; l < cfg.prior_layers; ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l);
    const int in = l == 0 ? channels_ : f;
    Layer layer;
    layer.vertical = nn::MaskedConv2d(
        store, p + ".v", in, 2 * f, k,
        spatial_mask(2 * f, in, k, l == 0 ? Tap::kAbove : Tap::kAboveOrRow), rng);
    layer.horizontal = nn::MaskedConv2d(
        store, p + ".h", in, 2 * f, k,
        spatial_mask(2 * f, in, k, l == 0 ? Tap::kLeft : Tap::kLeftOrCenter), rng);
    // Every convolution in the prior uses the direct masked kernel, so a
    // context value is computed by the same arithmetic on any grid size.
    layer.v_to_h = nn::MaskedConv2d(store, p + ".v2h", 2 * f, 2 * f, 1,
                                    std::vector<std::uint8_t>(4 * f * f, 1), rng);
    layer.h_out = nn::MaskedConv2d(store, p + ".hout", f, f, 1,
                                   std::vector<std::uint8_t>(f * f, 1), rng);
    layers_.push_back(std::move(layer));
  }
  const int g = cfg.prior_head_hidden;
  head_hidden_ = nn::MaskedConv2d(store, prefix + ".head.hidden", f + channels_,
                                  channels_ * g, 1,
                                  group_mask(channels_ * g, g, f, channels_, 1, true), rng);
  head_out_ = nn::MaskedConv2d(store, prefix + ".head.out", channels_ * g,
                               channels_ * levels_, 1,
                               group_mask(channels_ * levels_, levels_, 0, channels_, g, false),
                               rng, /*zero_init=*/true);
}

Tensor PriorModel::context(const Tensor& zq) const {
  if (zq.shape().c != channels_) {
    throw InvalidArgument("prior expects " + std::to_string(channels_) +
                          " latent channels, got " + zq.shape().str());
  }
  Tensor v = zq;
  Tensor h = zq;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const Tensor v_pre = layer.vertical(v);
    const Tensor h_pre = ops::add(layer.horizontal(h), layer.v_to_h(v_pre));
    v = gate(v_pre, width_);
    const Tensor h_new = layer.h_out(gate(h_pre, width_));
    h = l == 0 ? h_new : ops::add(h, h_new);
  }
  return h;
}

int PriorModel::context_radius() const {
  return static_cast<int>(layers_.size()) * (kernel_ / 2);
}

Tensor PriorModel::head(const Tensor& ctx, const Tensor& zq) const {
  const Tensor hidden = ops::relu(head_hidden_(ops::concat_channels({ctx, zq})));
  return ops::log_softmax_groups(head_out_(hidden), levels_);
}

Tensor PriorModel::log_probs(const Tensor& zq) const {
  if (uniform_) {
    const Shape s = zq.shape();
    return Tensor(Shape{s.n, channels_ * levels_, s.h, s.w},
                  -std::log(static_cast<double>(levels_)));
  }
  return head(context(zq), zq);
}

void PriorModel::permute_levels(const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != levels_) {
    throw InvalidArgument("permutation size does not match codebook size");
  }
  Tensor w = head_out_.weight();
  Tensor b = head_out_.bias();
  const std::size_t row = w.numel() / static_cast<std::size_t>(w.shape().n);
  const std::vector<double> wv(w.values().begin(), w.values().end());
  const std::vector<double> bv(b.values().begin(), b.values().end());
  for (int c = 0; c < channels_; ++c) {
    for (int j = 0; j < levels_; ++j) {
      const std::size_t dst = static_cast<std::size_t>(c) * levels_ + j;
      const std::size_t src = static_cast<std::size_t>(c) * levels_ + perm[j];
      for (std::size_t i = 0; i < row; ++i) w.mutable_values()[dst * row + i] = wv[src * row + i];
      b.mutable_values()[dst] = bv[src];
    }
  }
}

std::vector<double> log_prob(const LatentGrid& z, const PriorModel& model,
                             const Codebook& codebook) {
  if (z.channels != model.channels()) {
    throw InvalidArgument("latent grid has " + std::to_string(z.channels) +
                          " channels, prior expects " + std::to_string(model.channels()));
  }
  NoGradGuard guard;
  const Tensor lp = model.log_probs(codebook.dequantize(z));
  const int levels = model.levels();
  const std::size_t plane = static_cast<std::size_t>(z.height) * z.width;
  std::vector<double> out(z.size());
  for (int c = 0; c < z.channels; ++c) {
    for (std::size_t p = 0; p < plane; ++p) {
      const int j = z.indices[c * plane + p];
      out[c * plane + p] = lp.values()[(static_cast<std::size_t>(c) * levels + j) * plane + p] / std::log(2.0);
    }
  }
  return out;
}

RateEstimate frame_rate(const LatentGrid& z, const PriorModel& model,
                        const Codebook& codebook) {
  RateEstimate r;
  for (double lp : log_prob(z, model, codebook)) {
    r.per_position_bits.push_back(-lp);
    r.total_bits += -lp;
  }
  return r;
}

RateEstimate gop_rate(const std::vector<LatentGrid>& z_gop,
                      const PriorModel& i_model, const PriorModel& p_model,
                      const Codebook& codebook) {
  if (z_gop.empty()) throw InvalidArgument("gop_rate: empty GoP");
  RateEstimate total;
  for (std::size_t t = 0; t < z_gop.size(); ++t) {
    const RateEstimate r = frame_rate(z_gop[t], t == 0 ? i_model : p_model, codebook);
    total.total_bits += r.total_bits;
    total.per_position_bits.insert(total.per_position_bits.end(),
                                   r.per_position_bits.begin(), r.per_position_bits.end());
  }
  return total;
}

Tensor rate_loss(const Tensor& soft, const Tensor& log_p, double pixels) {
  const double scale = -1.0 / (std::log(2.0) * pixels * soft.shape().n);
  return ops::mul_scalar(ops::sum(ops::mul(soft, log_p)), scale);
}

}  // namespace frae
