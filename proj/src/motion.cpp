#include "frae/motion.hpp"

#include <algorithm>
#include <cmath>

#include "frae/error.hpp"
#include "frae/ops.hpp"

namespace frae {

Frame warp(const Frame& image, const FlowField& flow) {
  if (image.height() != flow.height() || image.width() != flow.width()) {
    throw InvalidArgument("warp: frame and flow sizes differ");
  }
  NoGradGuard guard;
  return image_from_tensor<Frame>(ops::warp(to_tensor(image), to_tensor(flow)));
}

void MENetConfig::validate() const {
  if (base_width < 1) throw InvalidArgument("MENet base width must be at least 1");
  if (level_count < 1 || level_count > 8) {
    throw InvalidArgument("MENet level count must be in [1, 8]");
  }
}

namespace {

int level_width(const MENetConfig& cfg, int level) {
  return cfg.base_width << std::min(level, 3);
}

}  // namespace

MENet::MENet(nn::ParamStore& store, const std::string& prefix,
             const MENetConfig& cfg, nn::Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  int in = 6;
  for (int l = 0; l < cfg_.level_count; ++l) {
    const int out = level_width(cfg_, l);
    down_.emplace_back(store, prefix + ".down" + std::to_string(l), in, out, 3,
                       l == 0 ? 1 : 2, rng);
    in = out;
  }
  const int bottom = level_width(cfg_, cfg_.level_count);
  bottleneck_ = nn::Conv2d(store, prefix + ".bottleneck", in, bottom, 3, 2, rng);
  int below = bottom;
  up_.resize(cfg_.level_count);
  merge_.resize(cfg_.level_count);
  for (int l = cfg_.level_count - 1; l >= 0; --l) {
    const int skip = level_width(cfg_, l);
    up_[l] = nn::ConvTranspose2d(store, prefix + ".up" + std::to_string(l),
                                 below, skip, 4, 2, rng);
    merge_[l] = nn::Conv2d(store, prefix + ".merge" + std::to_string(l),
                           2 * skip, skip, 3, 1, rng);
    below = skip;
  }
  head_ = nn::Conv2d(store, prefix + ".head", below, 2, 3, 1, rng,
                     /*zero_init=*/true);
}

Tensor MENet::operator()(const Tensor& current, const Tensor& reference) const {
  const Shape s = current.shape();
  if (reference.shape() != s || s.c != 3) {
    throw InvalidArgument("MENet: inputs must be equally shaped RGB batches");
  }
  const int d = cfg_.divisor();
  if (s.h % d != 0 || s.w % d != 0) {
    throw InvalidArgument("MENet: frame " + std::to_string(s.w) + "x" +
                          std::to_string(s.h) + " must be divisible by " +
                          std::to_string(d));
  }
  std::vector<Tensor> skips;
  Tensor x = ops::concat_channels({current, reference});
  for (const nn::Conv2d& conv : down_) {
    x = ops::leaky_relu(conv(x), 0.1);
    skips.push_back(x);
  }
  x = ops::leaky_relu(bottleneck_(x), 0.1);
  for (int l = cfg_.level_count - 1; l >= 0; --l) {
    x = ops::leaky_relu(up_[l](x), 0.1);
    x = ops::leaky_relu(merge_[l](ops::concat_channels({x, skips[l]})), 0.1);
  }
  return head_(x);
}

FlowField menet_forward(const MENet& net, const Frame& current,
                        const Frame& reference) {
  NoGradGuard guard;
  return image_from_tensor<FlowField>(net(to_tensor(current), to_tensor(reference)));
}

FlowLosses flow_losses(const Tensor& current, const Tensor& reference,
                       const Tensor& f, const Tensor& f_hat,
                       const MsSsimConfig& metric) {
  auto distortion = [&](const Tensor& flow) {
    return ops::rsub_scalar(1.0, ops::mean(ms_ssim(ops::warp(reference, flow), current, metric)));
  };
  return {distortion(f), distortion(f_hat)};
}

std::pair<double, double> flow_losses(const Frame& current,
                                      const Frame& reference,
                                      const FlowField& f,
                                      const FlowField& f_hat,
                                      const MsSsimConfig& metric) {
  NoGradGuard guard;
  const FlowLosses l = flow_losses(to_tensor(current), to_tensor(reference),
                                   to_tensor(f), to_tensor(f_hat), metric);
  return {l.l_fe.item(), l.l_fd.item()};
}

std::pair<double, double> mean_flow(const FlowField& flow) {
  double u = 0.0, v = 0.0;
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      u += flow.at(0, y, x);
      v += flow.at(1, y, x);
    }
  }
  const double n = static_cast<double>(flow.height()) * flow.width();
  return {u / n, v / n};
}

Frame flow_to_color(const FlowField& flow, double max_magnitude) {
  double peak = max_magnitude;
  if (peak <= 0.0) {
    for (int y = 0; y < flow.height(); ++y) {
      for (int x = 0; x < flow.width(); ++x) {
        peak = std::max(peak, std::hypot(flow.at(0, y, x), flow.at(1, y, x)));
      }
    }
  }
  Frame out(flow.height(), flow.width(), 1.0);
  if (peak <= 0.0) return out;
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      const double u = flow.at(0, y, x), v = flow.at(1, y, x);
      const double sat = std::min(1.0, std::hypot(u, v) / peak);
      const double hue = (std::atan2(-v, -u) / M_PI + 1.0) * 3.0;  // [0, 6]
      const int sector = std::min(5, static_cast<int>(hue));
      const double f = hue - sector;
      double rgb[3];
      switch (sector) {
        case 0: rgb[0] = 1; rgb[1] = f; rgb[2] = 0; break;
        case 1: rgb[0] = 1 - f; rgb[1] = 1; rgb[2] = 0; break;
        case 2: rgb[0] = 0; rgb[1] = 1; rgb[2] = f; break;
        case 3: rgb[0] = 0; rgb[1] = 1 - f; rgb[2] = 1; break;
        case 4: rgb[0] = f; rgb[1] = 0; rgb[2] = 1; break;
        default: rgb[0] = 1; rgb[1] = 0; rgb[2] = 1 - f; break;
      }
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = 1.0 - sat * (1.0 - rgb[c]);
    }
  }
  return out;
}

}  // namespace frae
