#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "frae/codec_net.hpp"
#include "frae/nn.hpp"

namespace frae {

enum class FrameType : std::uint8_t { kI = 0, kP = 1 };

std::string_view to_string(FrameType t);

/// Gated PixelCNN over a latent grid. Cells are visited in raster order and
/// the channels of one cell in increasing order; the distribution of
/// (cell p, channel c) depends only on earlier cells and on channels < c of
/// cell p. The network input is the dequantized latent (center values).
class PriorModel {
 public:
  PriorModel() = default;
  PriorModel(nn::ParamStore& store, const std::string& prefix,
             const CodecConfig& cfg, FrameType type, nn::Rng& rng);

  FrameType frame_type() const { return type_; }
  int channels() const { return channels_; }
  int levels() const { return levels_; }

  /// Forces every conditional to the uniform distribution (rate tests).
  void set_uniform(bool on) { uniform_ = on; }
  bool uniform() const { return uniform_; }

  /// (n, C, h, w) dequantized latents -> (n, C*L, h, w) natural-log
  /// probabilities, channel index c*L + j.
  Tensor log_probs(const Tensor& zq) const;

  /// Spatial context from strictly earlier cells: (n, F, h, w).
  Tensor context(const Tensor& zq) const;
  /// Rows and columns of input that can influence one context cell.
  int context_radius() const;
  /// Per-channel conditionals from the context and the same-cell latents.
  Tensor head(const Tensor& ctx, const Tensor& zq) const;

  /// Reorders the categorical outputs so that new index j reads old index
  /// perm[j] (used when the codebook is re-sorted).
  void permute_levels(const std::vector<int>& perm);

 private:
  struct Layer {
    nn::MaskedConv2d vertical;
    nn::MaskedConv2d horizontal;
    nn::MaskedConv2d v_to_h;
    nn::MaskedConv2d h_out;
  };
  std::vector<Layer> layers_;
  nn::MaskedConv2d head_hidden_;
  nn::MaskedConv2d head_out_;
  FrameType type_ = FrameType::kP;
  int channels_ = 0;
  int levels_ = 0;
  int width_ = 0;
  int kernel_ = 3;
  bool uniform_ = false;
};

struct RateEstimate {
  double total_bits = 0.0;
  /// -log2 P per latent scalar, channel-major like LatentGrid.
  std::vector<double> per_position_bits;
};

/// Per-scalar log2 probabilities of z under the model.
std::vector<double> log_prob(const LatentGrid& z, const PriorModel& model,
                             const Codebook& codebook);

RateEstimate frame_rate(const LatentGrid& z, const PriorModel& model,
                        const Codebook& codebook);

/// -log2 P^I(z_0) + sum_i -log2 P^P(z_i). The P-frame term factorizes over
/// time; per-position bits are concatenated frame by frame.
RateEstimate gop_rate(const std::vector<LatentGrid>& z_gop,
                      const PriorModel& i_model, const PriorModel& p_model,
                      const Codebook& codebook);

/// Soft cross-entropy in bits between quantizer assignments `soft`
/// (n, C*L, h, w) and prior log-probabilities `log_p` of the same shape,
/// divided by `pixels` and averaged over the batch.
Tensor rate_loss(const Tensor& soft, const Tensor& log_p, double pixels);

}  // namespace frae
