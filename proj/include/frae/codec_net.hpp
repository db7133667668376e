#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "frae/image.hpp"
#include "frae/nn.hpp"

namespace frae {

enum class Ablation { kNone, kNoFeedback, kNoRecurrence, kNoMenet };

std::string_view to_string(Ablation a);
Ablation parse_ablation(std::string_view s);

struct CodecConfig {
  int c1 = 32;               // trunk width
  int c2 = 10;               // latent channels (I and P)
  int c3 = 32;               // recurrent state channels
  int downsample_factor = 16;
  int codebook_size = 8;
  int gru_kernel = 3;
  int residual_blocks = 3;   // per encoder/decoder trunk
  double softmax_sigma = 1.0;
  bool batchnorm = true;
  int menet_width = 16;
  int menet_levels = 4;
  int prior_width = 32;
  int prior_layers = 3;
  int prior_kernel = 3;
  int prior_head_hidden = 8;  // hidden units per latent channel in the head
  Ablation ablation = Ablation::kNone;

  void validate() const;
  int stride_stages() const;  // log2(downsample_factor)
  bool uses_menet() const { return ablation != Ablation::kNoMenet; }
  bool uses_recurrence() const { return ablation != Ablation::kNoRecurrence; }
  bool uses_feedback() const {
    return ablation == Ablation::kNone || ablation == Ablation::kNoMenet;
  }
  /// Required divisor of frame height and width.
  int frame_divisor() const;
};

/// Integer latent indices for one frame, channel-major.
struct LatentGrid {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> indices;

  LatentGrid() = default;
  LatentGrid(int c, int h, int w)
      : channels(c), height(h), width(w),
        indices(static_cast<std::size_t>(c) * h * w, 0) {}

  std::uint8_t& at(int c, int y, int x) {
    return indices[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::uint8_t at(int c, int y, int x) const {
    return indices[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t size() const { return indices.size(); }

  friend bool operator==(const LatentGrid&, const LatentGrid&) = default;
};

/// Decoder-side recurrent state at latent resolution; zero at GoP start.
struct RecurrentState {
  Tensor h;  // (n, C3, h, w), undefined when the model has no recurrence

  static RecurrentState zeros(int batch, int channels, int height, int width) {
    return {Tensor(Shape{batch, channels, height, width}, 0.0)};
  }
};

/// Learnable scalar centers shared by every latent position.
class Codebook {
 public:
  Codebook() = default;
  Codebook(nn::ParamStore& store, const std::string& prefix, int levels);

  const Tensor& centers() const { return centers_; }
  int size() const { return static_cast<int>(centers_.shape().c); }

  /// Hard nearest-center indices for batch item `item` of y.
  LatentGrid quantize(const Tensor& y, int item = 0) const;
  /// Center values as a (1,c,h,w) tensor without autograd history.
  Tensor dequantize(const LatentGrid& z) const;
  /// Dequantizes a batch of grids into (n,c,h,w).
  Tensor dequantize(const std::vector<LatentGrid>& zs) const;

  /// Permutation that sorts the centers ascending (stable).
  std::vector<int> sorting_permutation() const;

 private:
  Tensor centers_;
};

struct NormMode {
  bool use_batch_stats = false;
};

/// Training-statistics mode before `freeze_at`, frozen running statistics
/// from then on.
NormMode set_normalization_mode(long iteration, long freeze_at = 40000);

/// Strided conv encoder: x -> (n, C2, h/D, w/D) latent activations. With
/// `feedback_channels > 0` the recurrent state is concatenated before the
/// last layer.
class FrameEncoder {
 public:
  FrameEncoder() = default;
  FrameEncoder(nn::ParamStore& store, const std::string& prefix,
               const CodecConfig& cfg, int in_channels, int feedback_channels,
               nn::Rng& rng);

  Tensor operator()(const Tensor& x, const Tensor& feedback,
                    const nn::NormContext& norm) const;
  int in_channels() const { return in_channels_; }
  int feedback_channels() const { return feedback_channels_; }

 private:
  struct Stage {
    nn::Conv2d conv;
    nn::BatchNorm2d bn;
  };
  std::vector<Stage> head_stages_;
  std::vector<nn::ResidualBlock> blocks_;
  std::vector<Stage> tail_stages_;
  nn::Conv2d out_;
  bool batchnorm_ = true;
  int in_channels_ = 0;
  int feedback_channels_ = 0;
};

/// Transposed-conv decoder trunk from latent resolution to half resolution,
/// followed by one or two stride-2 output heads at full resolution.
class FrameDecoderTrunk {
 public:
  FrameDecoderTrunk() = default;
  FrameDecoderTrunk(nn::ParamStore& store, const std::string& prefix,
                    const CodecConfig& cfg, int in_channels, nn::Rng& rng);

  /// (n, in, h, w) -> (n, C1, H/2, W/2)
  Tensor operator()(const Tensor& x, const nn::NormContext& norm) const;

 private:
  struct Stage {
    nn::ConvTranspose2d conv;
    nn::BatchNorm2d bn;
  };
  std::vector<Stage> head_stages_;
  std::vector<nn::ResidualBlock> blocks_;
  std::vector<Stage> tail_stages_;
  bool batchnorm_ = true;
};

class IFrameDecoder {
 public:
  IFrameDecoder() = default;
  IFrameDecoder(nn::ParamStore& store, const std::string& prefix,
                const CodecConfig& cfg, nn::Rng& rng);

  /// Dequantized latents -> unclamped RGB.
  Tensor operator()(const Tensor& z, const nn::NormContext& norm) const;

 private:
  nn::Conv2d in_;
  nn::BatchNorm2d in_bn_;
  FrameDecoderTrunk trunk_;
  nn::ConvTranspose2d out_;
  bool batchnorm_ = true;
};

struct PFrameDecoderOutput {
  Tensor flow;      // (n,2,H,W)
  Tensor residual;  // (n,3,H,W)
  RecurrentState state;
};

class PFrameDecoder {
 public:
  PFrameDecoder() = default;
  PFrameDecoder(nn::ParamStore& store, const std::string& prefix,
                const CodecConfig& cfg, nn::Rng& rng);

  PFrameDecoderOutput operator()(const Tensor& z, const RecurrentState& prev,
                                 const nn::NormContext& norm) const;
  bool recurrent() const { return recurrent_; }

 private:
  nn::Conv2d in_;
  nn::BatchNorm2d in_bn_;
  nn::ConvGru gru_;
  FrameDecoderTrunk trunk_;
  nn::ConvTranspose2d flow_head_;
  nn::ConvTranspose2d residual_head_;
  bool batchnorm_ = true;
  bool recurrent_ = true;
};

/// x_hat = warp(prev_recon, f_hat) + r_hat, clamped to [0,1] in the forward
/// pass with an identity gradient.
Tensor reconstruct(const Tensor& f_hat, const Tensor& prev_recon,
                   const Tensor& r_hat);
Frame reconstruct(const FlowField& f_hat, const Frame& prev_recon,
                  const Frame& r_hat);

}  // namespace frae
