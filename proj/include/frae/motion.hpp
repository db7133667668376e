#pragma once

#include <string>
#include <utility>
#include <vector>

#include "frae/image.hpp"
#include "frae/metrics.hpp"
#include "frae/nn.hpp"

namespace frae {

/// Bilinear backward warp with border clamping (see ops::warp).
Frame warp(const Frame& image, const FlowField& flow);

struct MENetConfig {
  int base_width = 16;
  int level_count = 4;

  void validate() const;
  /// Required divisor of the input height and width.
  int divisor() const { return 1 << level_count; }
};

/// U-Net flow estimator. Level l runs at 1/2^l resolution with
/// base_width * 2^min(l,3) channels; a bottleneck sits one level below the
/// last. The flow head is zero-initialised so the initial flow is 0.
class MENet {
 public:
  MENet() = default;
  MENet(nn::ParamStore& store, const std::string& prefix,
        const MENetConfig& cfg, nn::Rng& rng);

  /// (n,3,h,w) current, (n,3,h,w) reference -> (n,2,h,w) flow in pixels.
  Tensor operator()(const Tensor& current, const Tensor& reference) const;
  const MENetConfig& config() const { return cfg_; }

 private:
  MENetConfig cfg_;
  std::vector<nn::Conv2d> down_;
  nn::Conv2d bottleneck_;
  std::vector<nn::ConvTranspose2d> up_;
  std::vector<nn::Conv2d> merge_;
  nn::Conv2d head_;
};

FlowField menet_forward(const MENet& net, const Frame& current,
                        const Frame& reference);

struct FlowLosses {
  Tensor l_fe;  // scalar
  Tensor l_fd;  // scalar
};

/// L_fe = D(warp(reference, f), current), L_fd = D(warp(reference, f_hat),
/// current) with D = 1 - MS-SSIM, averaged over the batch.
FlowLosses flow_losses(const Tensor& current, const Tensor& reference,
                       const Tensor& f, const Tensor& f_hat,
                       const MsSsimConfig& metric);
std::pair<double, double> flow_losses(const Frame& current,
                                      const Frame& reference,
                                      const FlowField& f,
                                      const FlowField& f_hat,
                                      const MsSsimConfig& metric);

/// Reference used for the flow-loss targets (and the flow estimator input):
/// the ground-truth previous frame before `switch_iter`, the previous
/// reconstruction from then on.
template <class T>
const T& select_reference(long iteration, const T& prev_frame,
                          const T& prev_recon, long switch_iter) {
  return iteration < switch_iter ? prev_frame : prev_recon;
}

/// Color-wheel rendering: hue encodes direction, saturation the magnitude
/// relative to `max_magnitude` (the field's own maximum when <= 0).
Frame flow_to_color(const FlowField& flow, double max_magnitude = 0.0);

/// Mean (horizontal, vertical) displacement.
std::pair<double, double> mean_flow(const FlowField& flow);

}  // namespace frae
