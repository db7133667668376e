#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "frae/image.hpp"

namespace frae {

/// One 8-bit planar I420 frame: full-resolution luma, 2x2-subsampled chroma.
struct YuvFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> y;
  std::vector<std::uint8_t> u;
  std::vector<std::uint8_t> v;

  static std::size_t frame_bytes(int width, int height) {
    return static_cast<std::size_t>(width) * height * 3 / 2;
  }
};

/// Name of the YUV->RGB path, recorded next to every evaluation result.
inline constexpr std::string_view kConversionMethod =
    "bt601-limited-nearest-chroma";

/// Reads headerless frame-major I420. `max_frames == 0` reads until the end
/// of the stream. Throws TruncatedVideo naming the first incomplete frame.
std::vector<YuvFrame> read_yuv420(std::istream& in, int width, int height,
                                  std::size_t max_frames);
std::vector<YuvFrame> read_yuv420_file(const std::filesystem::path& path,
                                       int width, int height,
                                       std::size_t max_frames);
void write_yuv420(std::ostream& out, const YuvFrame& frame);

/// Limited-range BT.601 with nearest-neighbour chroma upsampling, clamped
/// to [0, 1].
Frame yuv_to_rgb(const YuvFrame& frame);
/// Inverse conversion with 2x2 chroma averaging (used to produce raw test
/// material and decoded-output files).
YuvFrame rgb_to_yuv(const Frame& frame);

/// Binary PPM (P6, maxval 255) still images, used by the color probe and
/// flow visualisation.
Frame read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Frame& frame);

struct GroupOfPictures {
  std::vector<Frame> frames;  // frames[0] is the I-frame
  int gop_size = 0;
};

std::vector<GroupOfPictures> split_gops(std::span<const Frame> frames,
                                        int gop_size);

struct CropWindow {
  int top = 0;
  int left = 0;
  int size = 0;
};

/// Deterministic square crop position for a given seed.
CropWindow random_crop_window(int height, int width, int size,
                              std::uint64_t seed);
Frame crop(const Frame& frame, const CropWindow& window);
Frame random_crop(const Frame& frame, int size, std::uint64_t seed);
/// Applies one crop window to every frame of a training clip.
std::vector<Frame> random_crop_clip(std::span<const Frame> clip, int size,
                                    std::uint64_t seed);

/// Synthetic clip: a smooth periodic color texture translated by (dx, dy)
/// pixels per frame. Deterministic given the seed.
std::vector<Frame> translating_texture_clip(int frames, int size, double dx,
                                            double dy, std::uint64_t seed);

}  // namespace frae
