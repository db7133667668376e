#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "frae/entropy_coding.hpp"
#include "frae/fast_coder.hpp"
#include "frae/metrics.hpp"
#include "frae/model.hpp"

namespace frae {

/// Normalisation behaviour of the deployed codec: running statistics.
nn::NormContext inference_norm();

/// Symbols of one latent grid with their quantized conditionals, in coding
/// order: cells in raster order, channels of a cell in increasing order.
/// `cross_entropy_bits` receives sum(-log2 p) under the unquantized model.
SymbolStream latent_symbols(const LatentGrid& z, const PriorModel& prior,
                            const Codebook& codebook,
                            double* cross_entropy_bits = nullptr);

std::vector<std::uint8_t> encode_latents(const LatentGrid& z,
                                         const PriorModel& prior,
                                         const Codebook& codebook,
                                         const CoderBackend& backend,
                                         double* cross_entropy_bits = nullptr);

/// Sequential decode: the conditionals of each cell are recomputed from the
/// symbols decoded so far on a window covering the prior's receptive field.
LatentGrid decode_latents(std::span<const std::uint8_t> payload, int channels,
                          int height, int width, const PriorModel& prior,
                          const Codebook& codebook);

struct FrameStats {
  int gop = 0;
  int position = 0;  // index within the GoP, 0 = I-frame
  FrameType type = FrameType::kI;
  std::uint64_t payload_bits = 0;
  double cross_entropy_bits = 0.0;
};

struct EncodeResult {
  std::vector<GopBitstream> gops;
  std::vector<Frame> recons;  // encoder-side closed-loop reconstructions
  std::vector<FrameStats> stats;
  std::vector<FlowField> flows;  // decoded flow per frame; empty for I-frames
};

/// Closed-loop encode: each P-frame is predicted from the previous
/// reconstruction exactly as the decoder will see it.
EncodeResult encode_video(const Model& model, std::span<const Frame> frames,
                          int gop_size,
                          const CoderBackend& backend = CoderBackend::reference());

/// Entropy-decodes the latents of every frame concurrently, then runs the
/// synthesis networks in order.
std::vector<Frame> decode_video(const Model& model,
                                std::span<const GopBitstream> gops,
                                unsigned threads = 0);

/// Sidecar description written next to a .frae file as "<file>.manifest".
struct StreamManifest {
  std::string model_hash;
  int width = 0;
  int height = 0;
  int gop_size = 0;
  int frame_count = 0;
  int codebook_size = 0;
};

std::filesystem::path manifest_path(const std::filesystem::path& stream);

void write_frae(const std::filesystem::path& path,
                std::span<const GopBitstream> gops,
                const StreamManifest& manifest,
                const CoderBackend& backend = CoderBackend::reference());
/// Reads the containers and the sidecar. A missing sidecar yields an empty
/// model hash.
std::vector<GopBitstream> read_frae(const std::filesystem::path& path,
                                    StreamManifest* manifest = nullptr);

/// Throws ModelError when the stream was not produced by `model` or does
/// not fit its geometry.
void check_stream(const Model& model, std::span<const GopBitstream> gops,
                  const StreamManifest& manifest);

struct PositionStats {
  int position = 0;
  double ms_ssim = 0.0;
  double bits = 0.0;
  double bpp = 0.0;
  int samples = 0;
};

/// Averages of MS-SSIM, bits and bits per pixel per GoP position.
std::vector<PositionStats> per_frame_stats(std::span<const Frame> originals,
                                           std::span<const Frame> recons,
                                           std::span<const FrameStats> stats,
                                           const MsSsimConfig& cfg = {});

}  // namespace frae
