#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "frae/ops.hpp"
#include "frae/tensor.hpp"

namespace frae::nn {

using Rng = std::mt19937_64;

/// Ordered registry of named parameters and buffers. Names are unique and
/// hierarchical ("pframe.enc.conv0.weight"); the order is the checkpoint
/// order.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    bool trainable;
  };

  Tensor add(const std::string& name, Shape shape, std::vector<double> values,
             bool trainable = true);
  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  /// Trainable tensors whose name starts with `prefix`.
  std::vector<Tensor> trainable(std::string_view prefix = "") const;
  void zero_grad();

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// LeCun-uniform initial values for a weight with the given fan-in.
std::vector<double> lecun_uniform(std::size_t count, double fan_in, Rng& rng);

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamStore& store, const std::string& prefix, int in, int out,
         int kernel, int stride, Rng& rng, bool zero_init = false);

  Tensor operator()(const Tensor& x) const;
  int out_channels() const { return weight_.shape().n; }

 private:
  Tensor weight_;
  Tensor bias_;
  int stride_ = 1;
  int pad_ = 0;
};

/// Transposed convolution that upsamples exactly by `stride`.
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(ParamStore& store, const std::string& prefix, int in,
                  int out, int kernel, int stride, Rng& rng,
                  bool zero_init = false);

  Tensor operator()(const Tensor& x) const;

 private:
  Tensor weight_;
  Tensor bias_;
  int stride_ = 2;
  int pad_ = 0;
  int output_pad_ = 0;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(ParamStore& store, const std::string& prefix, int channels);

  Tensor operator()(const Tensor& x, bool use_batch_stats) const;

 private:
  Tensor gamma_;
  Tensor beta_;
  mutable ops::BatchNormState state_;
};

/// How normalisation layers behave in a forward pass.
struct NormContext {
  bool enabled = true;          // layers present at all
  bool use_batch_stats = false; // training statistics vs running estimates
};

/// conv3 -> BN -> ReLU -> conv3 -> BN, plus identity skip.
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(ParamStore& store, const std::string& prefix, int channels,
                bool batchnorm, Rng& rng);

  Tensor operator()(const Tensor& x, const NormContext& norm) const;

 private:
  Conv2d conv_a_;
  Conv2d conv_b_;
  BatchNorm2d bn_a_;
  BatchNorm2d bn_b_;
  bool batchnorm_ = true;
};

/// Convolutional GRU cell.
class ConvGru {
 public:
  ConvGru() = default;
  ConvGru(ParamStore& store, const std::string& prefix, int in, int hidden,
          int kernel, Rng& rng);

  Tensor operator()(const Tensor& x, const Tensor& h) const;
  int hidden() const { return hidden_; }

 private:
  Conv2d gates_;
  Conv2d candidate_;
  int hidden_ = 0;
};

/// Convolution whose weights are restricted by a fixed causal mask.
class MaskedConv2d {
 public:
  MaskedConv2d() = default;
  MaskedConv2d(ParamStore& store, const std::string& prefix, int in, int out,
               int kernel, std::vector<std::uint8_t> mask, Rng& rng,
               bool zero_init = false);

  Tensor operator()(const Tensor& x) const;
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
  std::vector<std::uint8_t> mask_;
};

/// Adam with bias correction.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void step(double lr);
  void zero_grad();
  long steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

}  // namespace frae::nn
