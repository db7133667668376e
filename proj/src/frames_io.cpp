#include "frae/frames_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <string>

namespace frae {

namespace {

void check_dims(int width, int height) {
  if (width <= 0 || height <= 0 || width % 2 != 0 || height % 2 != 0) {
    throw InvalidArgument("I420 dimensions must be positive and even, got " +
                          std::to_string(width) + "x" + std::to_string(height));
  }
}

}  // namespace

std::vector<YuvFrame> read_yuv420(std::istream& in, int width, int height,
                                  std::size_t max_frames) {
  check_dims(width, height);
  const std::size_t luma = static_cast<std::size_t>(width) * height;
  const std::size_t chroma = luma / 4;
  const std::size_t bytes = luma + 2 * chroma;
  std::vector<YuvFrame> frames;
  std::vector<char> buffer(bytes);
  for (std::size_t index = 0; max_frames == 0 || index < max_frames; ++index) {
    in.read(buffer.data(), static_cast<std::streamsize>(bytes));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got == 0 && max_frames == 0) break;
    if (got < bytes) {
      throw TruncatedVideo(index, "raw video truncated: frame " +
                                      std::to_string(index) + " has " +
                                      std::to_string(got) + " of " +
                                      std::to_string(bytes) + " bytes");
    }
    YuvFrame f;
    f.width = width;
    f.height = height;
    const auto* p = reinterpret_cast<const std::uint8_t*>(buffer.data());
    f.y.assign(p, p + luma);
    f.u.assign(p + luma, p + luma + chroma);
    f.v.assign(p + luma + chroma, p + bytes);
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<YuvFrame> read_yuv420_file(const std::filesystem::path& path,
                                       int width, int height,
                                       std::size_t max_frames) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open raw video '" + path.string() + "'");
  return read_yuv420(in, width, height, max_frames);
}

void write_yuv420(std::ostream& out, const YuvFrame& frame) {
  out.write(reinterpret_cast<const char*>(frame.y.data()), static_cast<std::streamsize>(frame.y.size()));
  out.write(reinterpret_cast<const char*>(frame.u.data()), static_cast<std::streamsize>(frame.u.size()));
  out.write(reinterpret_cast<const char*>(frame.v.data()), static_cast<std::streamsize>(frame.v.size()));
  if (!out) throw IoError("failed to write raw video frame");
}

Frame yuv_to_rgb(const YuvFrame& frame) {
  check_dims(frame.width, frame.height);
  const std::size_t luma = static_cast<std::size_t>(frame.width) * frame.height;
  if (frame.y.size() != luma || frame.u.size() != luma / 4 || frame.v.size() != luma / 4) {
    throw InvalidArgument("I420 plane sizes do not match dimensions");
  }
  Frame rgb(frame.height, frame.width);
  const int cw = frame.width / 2;
  for (int r = 0; r < frame.height; ++r) {
    for (int c = 0; c < frame.width; ++c) {
      const double y = (frame.y[static_cast<std::size_t>(r) * frame.width + c] - 16.0) / 219.0;
      const std::size_t ci = static_cast<std::size_t>(r / 2) * cw + c / 2;
      const double pb = (frame.u[ci] - 128.0) / 224.0;
      const double pr = (frame.v[ci] - 128.0) / 224.0;
      rgb.at(0, r, c) = std::clamp(y + 1.402 * pr, 0.0, 1.0);
      rgb.at(1, r, c) = std::clamp(y - 0.344136 * pb - 0.714136 * pr, 0.0, 1.0);
      rgb.at(2, r, c) = std::clamp(y + 1.772 * pb, 0.0, 1.0);
    }
  }
  return rgb;
}

YuvFrame rgb_to_yuv(const Frame& frame) {
  check_dims(frame.width(), frame.height());
  YuvFrame out;
  out.width = frame.width();
  out.height = frame.height();
  const std::size_t luma = static_cast<std::size_t>(out.width) * out.height;
  out.y.resize(luma);
  out.u.resize(luma / 4);
  out.v.resize(luma / 4);
  auto to_byte = [](double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  };
  std::vector<double> pb(luma), pr(luma);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      const double R = frame.at(0, r, c), G = frame.at(1, r, c), B = frame.at(2, r, c);
      const double y = 0.299 * R + 0.587 * G + 0.114 * B;
      const std::size_t i = static_cast<std::size_t>(r) * out.width + c;
      out.y[i] = to_byte(16.0 + 219.0 * y);
      pb[i] = (B - y) / 1.772;
      pr[i] = (R - y) / 1.402;
    }
  }
  const int cw = out.width / 2;
  for (int r = 0; r < out.height / 2; ++r) {
    for (int c = 0; c < cw; ++c) {
      double sb = 0.0, sr = 0.0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const std::size_t i = static_cast<std::size_t>(2 * r + dy) * out.width + 2 * c + dx;
          sb += pb[i];
          sr += pr[i];
        }
      }
      out.u[static_cast<std::size_t>(r) * cw + c] = to_byte(128.0 + 224.0 * sb / 4.0);
      out.v[static_cast<std::size_t>(r) * cw + c] = to_byte(128.0 + 224.0 * sr / 4.0);
    }
  }
  return out;
}

Frame read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path.string() + "'");
  auto token = [&in]() {
    std::string t;
    while (in >> std::ws && in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
    }
    in >> t;
    return t;
  };
  if (token() != "P6") throw IoError("'" + path.string() + "' is not a binary PPM (P6)");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(token());
    height = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw IoError("malformed PPM header in '" + path.string() + "'");
  }
  if (width <= 0 || height <= 0 || maxval != 255) {
    throw IoError("unsupported PPM geometry or depth in '" + path.string() + "'");
  }
  in.get();
  std::vector<unsigned char> bytes(static_cast<std::size_t>(width) * height * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw IoError("PPM '" + path.string() + "' is truncated");
  }
  Frame f(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        f.at(c, y, x) = bytes[(static_cast<std::size_t>(y) * width + x) * 3 + c] / 255.0;
      }
    }
  }
  return f;
}

void write_ppm(const std::filesystem::path& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create image '" + path.string() + "'");
  out << "P6\n" << frame.width() << " " << frame.height() << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(frame.width()) * frame.height() * 3);
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        bytes[(static_cast<std::size_t>(y) * frame.width() + x) * 3 + c] = static_cast<unsigned char>(
            std::clamp(std::lround(frame.at(c, y, x) * 255.0), 0L, 255L));
      }
    }
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed to write image '" + path.string() + "'");
}

std::vector<GroupOfPictures> split_gops(std::span<const Frame> frames,
                                        int gop_size) {
  if (gop_size < 1) throw InvalidArgument("GoP size must be at least 1");
  std::vector<GroupOfPictures> gops;
  for (std::size_t start = 0; start < frames.size(); start += gop_size) {
    const std::size_t end = std::min(frames.size(), start + gop_size);
    GroupOfPictures gop;
    gop.gop_size = gop_size;
    gop.frames.assign(frames.begin() + start, frames.begin() + end);
    gops.push_back(std::move(gop));
  }
  return gops;
}

CropWindow random_crop_window(int height, int width, int size,
                              std::uint64_t seed) {
  if (size <= 0 || size > std::min(height, width)) {
    throw InvalidArgument("crop size " + std::to_string(size) +
                          " exceeds frame " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> top(0, height - size);
  std::uniform_int_distribution<int> left(0, width - size);
  CropWindow w;
  w.top = top(rng);
  w.left = left(rng);
  w.size = size;
  return w;
}

Frame crop(const Frame& frame, const CropWindow& window) {
  if (window.top < 0 || window.left < 0 || window.size <= 0 ||
      window.top + window.size > frame.height() ||
      window.left + window.size > frame.width()) {
    throw InvalidArgument("crop window outside frame");
  }
  Frame out(window.size, window.size);
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < window.size; ++r) {
      for (int x = 0; x < window.size; ++x) {
        out.at(c, r, x) = frame.at(c, window.top + r, window.left + x);
      }
    }
  }
  return out;
}

Frame random_crop(const Frame& frame, int size, std::uint64_t seed) {
  return crop(frame, random_crop_window(frame.height(), frame.width(), size, seed));
}

std::vector<Frame> random_crop_clip(std::span<const Frame> clip, int size,
                                    std::uint64_t seed) {
  if (clip.empty()) return {};
  const CropWindow w =
      random_crop_window(clip.front().height(), clip.front().width(), size, seed);
  std::vector<Frame> out;
  out.reserve(clip.size());
  for (const Frame& f : clip) out.push_back(crop(f, w));
  return out;
}

std::vector<Frame> translating_texture_clip(int frames, int size, double dx,
                                            double dy, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  struct Wave { double fx, fy, ph, amp; };
  std::vector<Wave> waves[3];
  for (int c = 0; c < 3; ++c) {
    for (int k = 1; k <= 3; ++k) {
      waves[c].push_back({double(k), double((k * (c + 2)) % 4), phase(rng), 0.25 / k});
      waves[c].push_back({double((k + c) % 3), double(k), phase(rng), 0.2 / k});
    }
  }
  std::vector<Frame> clip;
  for (int t = 0; t < frames; ++t) {
    Frame f(size, size);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          double v = 0.5;
          const double u = (x - dx * t) / size;
          const double w = (y - dy * t) / size;
          for (const Wave& wv : waves[c]) {
            v += wv.amp * std::sin(2.0 * M_PI * (wv.fx * u + wv.fy * w) + wv.ph);
          }
          f.at(c, y, x) = std::clamp(v, 0.0, 1.0);
        }
      }
    }
    clip.push_back(std::move(f));
  }
  return clip;
}

}  // namespace frae
