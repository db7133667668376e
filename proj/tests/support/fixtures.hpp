#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "frae/frames_io.hpp"
#include "frae/image.hpp"
#include "frae/model.hpp"

namespace frae::test {

/// Narrow model that still exercises every component (D = 16, MENet with
/// four levels, recurrent decoder, feedback).
inline CodecConfig small_config() {
  CodecConfig c;
  c.c1 = 8;
  c.c2 = 4;
  c.c3 = 8;
  c.downsample_factor = 16;
  c.codebook_size = 8;
  c.residual_blocks = 1;
  c.menet_width = 4;
  c.menet_levels = 4;
  c.prior_width = 8;
  c.prior_layers = 2;
  c.prior_head_hidden = 4;
  return c;
}

/// Adds uniform noise to every trainable parameter so that zero-initialised
/// heads (prior output, flow) produce non-trivial values.
inline void perturb_parameters(Model& model, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-scale, scale);
  for (const auto& e : model.params().entries()) {
    if (!e.trainable || e.name.rfind("codebook", 0) == 0) continue;
    Tensor t = e.tensor;
    for (double& v : t.mutable_values()) v += d(rng);
  }
}

inline Frame random_frame(int height, int width, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  Frame f(height, width);
  for (double& v : f.data()) v = d(rng);
  return f;
}

inline std::vector<Frame> random_clip(int frames, int height, int width,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Frame> clip;
  for (int i = 0; i < frames; ++i) clip.push_back(random_frame(height, width, rng));
  return clip;
}

inline std::vector<Frame> translating_texture(int frames, int size, double dx,
                                              double dy, std::uint64_t seed) {
  return translating_texture_clip(frames, size, dx, dy, seed);
}

}  // namespace frae::test
