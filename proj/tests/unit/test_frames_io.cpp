#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "frae/frames_io.hpp"
#include "support/fixtures.hpp"

namespace frae {
namespace {

std::string raw_bytes(std::size_t n, std::uint8_t fill = 100) {
  return std::string(n, static_cast<char>(fill));
}

TEST(ReadYuv, ReadsRequestedFrameCount) {
  std::istringstream in(raw_bytes(6144 * 3));
  const auto frames = read_yuv420(in, 64, 64, 3);
  ASSERT_EQ(frames.size(), 3u);
  EXPECT_EQ(frames[2].y.size(), 4096u);
  EXPECT_EQ(frames[2].u.size(), 1024u);
}

TEST(ReadYuv, ZeroMaxFramesReadsToEnd) {
  std::istringstream in(raw_bytes(6144 * 5));
  EXPECT_EQ(read_yuv420(in, 64, 64, 0).size(), 5u);
}

TEST(ReadYuv, TruncationNamesFirstIncompleteFrame) {
  std::istringstream in(raw_bytes(6144));
  try {
    read_yuv420(in, 64, 64, 2);
    FAIL() << "expected TruncatedVideo";
  } catch (const TruncatedVideo& e) {
    EXPECT_EQ(e.frame_index(), 1u);
  }
  std::istringstream partial(raw_bytes(6144 + 100));
  try {
    read_yuv420(partial, 64, 64, 0);
    FAIL() << "expected TruncatedVideo";
  } catch (const TruncatedVideo& e) {
    EXPECT_EQ(e.frame_index(), 1u);
  }
}

TEST(ReadYuv, FullHdPlaneSizes) {
  std::istringstream in(raw_bytes(YuvFrame::frame_bytes(1920, 1080)));
  const auto frames = read_yuv420(in, 1920, 1080, 1);
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].y.size(), 2073600u);
  EXPECT_EQ(frames[0].u.size(), 518400u);
  EXPECT_EQ(frames[0].v.size(), 518400u);
}

TEST(ReadYuv, RejectsOddDimensions) {
  std::istringstream in(raw_bytes(100));
  EXPECT_THROW(read_yuv420(in, 63, 64, 1), InvalidArgument);
}

TEST(ReadYuv, MissingFileIsIoError) {
  EXPECT_THROW(read_yuv420_file("/nonexistent/clip.yuv", 64, 64, 0), IoError);
}

YuvFrame flat_yuv(int w, int h, std::uint8_t y, std::uint8_t u, std::uint8_t v) {
  YuvFrame f;
  f.width = w;
  f.height = h;
  f.y.assign(static_cast<std::size_t>(w) * h, y);
  f.u.assign(static_cast<std::size_t>(w) * h / 4, u);
  f.v.assign(static_cast<std::size_t>(w) * h / 4, v);
  return f;
}

// Integer-coefficient BT.601 studio-swing equations (8-bit form), evaluated
// per pixel with chroma taken from the covering 2x2 block.
std::array<double, 3> oracle_rgb(int Y, int U, int V) {
  const double c = Y - 16, d = U - 128, e = V - 128;
  const double r = (298.082 * c + 408.583 * e) / 256.0;
  const double g = (298.082 * c - 100.291 * d - 208.120 * e) / 256.0;
  const double b = (298.082 * c + 516.412 * d) / 256.0;
  auto unit = [](double v) { return std::clamp(v / 255.0, 0.0, 1.0); };
  return {unit(r), unit(g), unit(b)};
}

TEST(YuvToRgb, WhiteAndBlack) {
  const Frame white = yuv_to_rgb(flat_yuv(16, 8, 235, 128, 128));
  EXPECT_EQ(white.height(), 8);
  EXPECT_EQ(white.width(), 16);
  for (double v : white.data()) EXPECT_NEAR(v, 1.0, 1.0 / 255);
  const Frame black = yuv_to_rgb(flat_yuv(16, 8, 16, 128, 128));
  for (double v : black.data()) EXPECT_NEAR(v, 0.0, 1.0 / 255);
}

TEST(YuvToRgb, AgreesWithIntegerOracle) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int trial = 0; trial < 1000; ++trial) {
    YuvFrame f = flat_yuv(4, 4, 0, 0, 0);
    for (auto& s : f.y) s = static_cast<std::uint8_t>(byte(rng));
    for (auto& s : f.u) s = static_cast<std::uint8_t>(byte(rng));
    for (auto& s : f.v) s = static_cast<std::uint8_t>(byte(rng));
    const Frame rgb = yuv_to_rgb(f);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        const int ci = (y / 2) * 2 + x / 2;
        const auto want = oracle_rgb(f.y[y * 4 + x], f.u[ci], f.v[ci]);
        for (int c = 0; c < 3; ++c) {
          ASSERT_NEAR(rgb.at(c, y, x), want[c], 1.0 / 255);
          ASSERT_GE(rgb.at(c, y, x), 0.0);
          ASSERT_LE(rgb.at(c, y, x), 1.0);
        }
      }
    }
  }
}

TEST(YuvToRgb, RgbRoundTripOnFlatColors) {
  Frame f(8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      f.at(0, y, x) = 0.2;
      f.at(1, y, x) = 0.6;
      f.at(2, y, x) = 0.9;
    }
  }
  const Frame back = yuv_to_rgb(rgb_to_yuv(f));
  for (std::size_t i = 0; i < f.data().size(); ++i) {
    EXPECT_NEAR(back.data()[i], f.data()[i], 3.0 / 255);
  }
}

TEST(Ppm, RoundTripsAtEightBits) {
  std::mt19937_64 rng(4);
  Frame f = test::random_frame(6, 10, rng);
  for (double& v : f.data()) v = std::round(v * 255.0) / 255.0;
  const auto path = std::filesystem::temp_directory_path() / "frae_ppm_test.ppm";
  write_ppm(path, f);
  EXPECT_EQ(read_ppm(path), f);
  std::filesystem::remove(path);
}

TEST(SplitGops, ChunkSizes) {
  const auto frames = test::random_clip(20, 2, 2, 1);
  const auto gops = split_gops(frames, 8);
  ASSERT_EQ(gops.size(), 3u);
  EXPECT_EQ(gops[0].frames.size(), 8u);
  EXPECT_EQ(gops[1].frames.size(), 8u);
  EXPECT_EQ(gops[2].frames.size(), 4u);
  EXPECT_EQ(split_gops(std::span(frames).first(8), 8).size(), 1u);
  const auto single = split_gops(std::span(frames).first(1), 8);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].frames.size(), 1u);
  EXPECT_TRUE(split_gops(std::span<const Frame>(), 8).empty());
  EXPECT_THROW(split_gops(frames, 0), InvalidArgument);
}

TEST(SplitGops, ConcatenationRestoresInput) {
  const auto frames = test::random_clip(13, 2, 3, 2);
  std::vector<Frame> joined;
  for (const auto& g : split_gops(frames, 5)) {
    joined.insert(joined.end(), g.frames.begin(), g.frames.end());
  }
  EXPECT_EQ(joined, frames);
}

TEST(RandomCrop, SizeIdentityAndDeterminism) {
  std::mt19937_64 rng(5);
  const Frame f = test::random_frame(256, 256, rng);
  const Frame c = random_crop(f, 160, 9);
  EXPECT_EQ(c.height(), 160);
  EXPECT_EQ(c.width(), 160);
  EXPECT_EQ(random_crop(f, 160, 9), c);
  EXPECT_EQ(random_crop(f, 256, 9), f);
  EXPECT_THROW(random_crop(f, 257, 9), InvalidArgument);
}

TEST(RandomCrop, ClipSharesOneWindow) {
  const auto clip = test::random_clip(3, 32, 40, 6);
  const auto cropped = random_crop_clip(clip, 16, 11);
  const CropWindow w = random_crop_window(32, 40, 16, 11);
  for (std::size_t i = 0; i < clip.size(); ++i) EXPECT_EQ(cropped[i], crop(clip[i], w));
}

TEST(TextureClip, TranslatesByIntegerShift) {
  const auto clip = translating_texture_clip(2, 32, 2.0, 0.0, 3);
  for (int y = 0; y < 32; ++y) {
    for (int x = 2; x < 32; ++x) {
      for (int c = 0; c < 3; ++c) {
        EXPECT_NEAR(clip[1].at(c, y, x), clip[0].at(c, y, x - 2), 1e-12);
      }
    }
  }
}

}  // namespace
}  // namespace frae
