#pragma once

#include <span>
#include <vector>

#include "frae/error.hpp"
#include "frae/tensor.hpp"

namespace frae {

/// Planar (channel-major) real-valued image with a compile-time channel
/// count. The tag keeps frames and flow fields from being mixed up.
template <int Channels, class Tag>
class PlanarImage {
 public:
  static constexpr int kChannels = Channels;

  PlanarImage() = default;
  PlanarImage(int height, int width, double fill = 0.0)
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(Channels) * height * width, fill) {
    if (height <= 0 || width <= 0) {
      throw InvalidArgument("image dimensions must be positive");
    }
  }
  PlanarImage(int height, int width, std::vector<double> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(Channels) * height * width) {
      throw InvalidArgument("image data size does not match dimensions");
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  static constexpr int channels() { return Channels; }

  double& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  double at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  friend bool operator==(const PlanarImage&, const PlanarImage&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

struct FrameTag;
struct FlowTag;

/// H x W RGB image with values in [0, 1].
using Frame = PlanarImage<3, FrameTag>;
/// Per-pixel (horizontal, vertical) displacement in pixels.
using FlowField = PlanarImage<2, FlowTag>;

template <int C, class Tag>
Tensor to_tensor(const PlanarImage<C, Tag>& image) {
  return Tensor(Shape{1, C, image.height(), image.width()},
                std::vector<double>(image.data().begin(), image.data().end()));
}

/// Stacks equally sized images along the batch dimension.
template <int C, class Tag>
Tensor to_batch(std::span<const PlanarImage<C, Tag>> images) {
  if (images.empty()) throw InvalidArgument("to_batch: no images");
  const int h = images.front().height();
  const int w = images.front().width();
  std::vector<double> values;
  values.reserve(images.size() * static_cast<std::size_t>(C) * h * w);
  for (const auto& im : images) {
    if (im.height() != h || im.width() != w) {
      throw InvalidArgument("to_batch: images differ in size");
    }
    values.insert(values.end(), im.data().begin(), im.data().end());
  }
  return Tensor(Shape{static_cast<int>(images.size()), C, h, w}, std::move(values));
}

template <class Image>
Image image_from_tensor(const Tensor& t, int batch_index = 0) {
  const Shape s = t.shape();
  if (s.c != Image::kChannels || batch_index < 0 || batch_index >= s.n) {
    throw InvalidArgument("tensor " + s.str() + " is not a batch of " +
                          std::to_string(Image::kChannels) + "-channel images");
  }
  const std::size_t item = static_cast<std::size_t>(s.c) * s.plane();
  auto begin = t.values().begin() + batch_index * item;
  return Image(s.h, s.w, std::vector<double>(begin, begin + item));
}

}  // namespace frae
