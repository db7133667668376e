#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "frae/codec_net.hpp"
#include "frae/motion.hpp"
#include "frae/prior.hpp"

namespace frae {

void to_json(nlohmann::json& j, const CodecConfig& c);
void from_json(const nlohmann::json& j, CodecConfig& c);

struct EncodedFrame {
  Tensor y;      // continuous latents
  Tensor flow;   // MENet flow (P-frames with MENet only)
};

struct DecodedFrame {
  Tensor recon;      // clamped reconstruction
  Tensor flow_hat;   // P-frames only
  Tensor residual;   // P-frames only
  RecurrentState state;
};

/// All networks of the codec: I/P autoencoders, flow estimator, the shared
/// codebook and the two priors, registered in one parameter store.
class Model {
 public:
  Model(const CodecConfig& cfg, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const CodecConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const Codebook& codebook() const { return codebook_; }
  const PriorModel& prior(FrameType t) const { return t == FrameType::kI ? i_prior_ : p_prior_; }
  PriorModel& prior(FrameType t) { return t == FrameType::kI ? i_prior_ : p_prior_; }
  const MENet& menet() const { return menet_; }
  const FrameEncoder& pframe_encoder() const { return pframe_encoder_; }
  const PFrameDecoder& pframe_decoder() const { return pframe_decoder_; }

  /// Throws InvalidArgument unless the frame size suits the network.
  void check_frame_size(int height, int width) const;
  /// Zero state for a GoP start (undefined without recurrence).
  RecurrentState initial_state(int batch, int height, int width) const;

  EncodedFrame encode_iframe(const Tensor& x, const nn::NormContext& norm) const;
  DecodedFrame decode_iframe(const Tensor& zq, const nn::NormContext& norm) const;

  /// `menet_reference` feeds the flow estimator; the encoder itself always
  /// receives warp(prev_recon, flow).
  EncodedFrame encode_pframe(const Tensor& x, const Tensor& prev_recon,
                             const Tensor& menet_reference,
                             const RecurrentState& state,
                             const nn::NormContext& norm) const;
  DecodedFrame decode_pframe(const Tensor& zq, const Tensor& prev_recon,
                             const RecurrentState& state,
                             const nn::NormContext& norm) const;

  /// Sorts the codebook ascending and permutes both priors to match; the
  /// coded distribution is unchanged.
  void canonicalize_codebook();

  long iteration = 0;
  bool norm_frozen = false;

 private:
  CodecConfig cfg_;
  nn::ParamStore params_;
  Codebook codebook_;
  FrameEncoder iframe_encoder_;
  IFrameDecoder iframe_decoder_;
  FrameEncoder pframe_encoder_;
  PFrameDecoder pframe_decoder_;
  MENet menet_;
  PriorModel i_prior_;
  PriorModel p_prior_;
};

void save_checkpoint(const Model& model, const std::filesystem::path& path);
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path);

/// SHA-256 (hex) over the configuration and every parameter value.
std::string model_hash(const Model& model);

}  // namespace frae
