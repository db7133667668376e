#include "frae/nn.hpp"

#include <cmath>

#include "frae/error.hpp"

namespace frae::nn {

Tensor ParamStore::add(const std::string& name, Shape shape,
                       std::vector<double> values, bool trainable) {
  if (index_.count(name) != 0) {
    throw InvalidArgument("duplicate parameter name '" + name + "'");
  }
  Tensor t(shape, std::move(values));
  t.set_requires_grad(trainable);
  index_.emplace(name, entries_.size());
  entries_.push_back({name, t, trainable});
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
  return entries_[it->second].tensor;
}

bool ParamStore::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

std::vector<Tensor> ParamStore::trainable(std::string_view prefix) const {
  std::vector<Tensor> out;
  for (const Entry& e : entries_) {
    if (e.trainable && std::string_view(e.name).substr(0, prefix.size()) == prefix) {
      out.push_back(e.tensor);
    }
  }
  return out;
}

void ParamStore::zero_grad() {
  for (Entry& e : entries_) e.tensor.zero_grad();
}

std::vector<double> lecun_uniform(std::size_t count, double fan_in, Rng& rng) {
  const double bound = std::sqrt(3.0 / fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> out(count);
  for (double& v : out) v = dist(rng);
  return out;
}

Conv2d::Conv2d(ParamStore& store, const std::string& prefix, int in, int out,
               int kernel, int stride, Rng& rng, bool zero_init)
    : stride_(stride), pad_(kernel / 2) {
  const Shape ws{out, in, kernel, kernel};
  std::vector<double> w = zero_init
                              ? std::vector<double>(ws.numel(), 0.0)
                              : lecun_uniform(ws.numel(), double(in) * kernel * kernel, rng);
  weight_ = store.add(prefix + ".weight", ws, std::move(w));
  bias_ = store.add(prefix + ".bias", Shape{out, 1, 1, 1},
                    std::vector<double>(out, 0.0));
}

Tensor Conv2d::operator()(const Tensor& x) const {
  return ops::conv2d(x, weight_, bias_, stride_, pad_);
}

ConvTranspose2d::ConvTranspose2d(ParamStore& store, const std::string& prefix,
                                 int in, int out, int kernel, int stride,
                                 Rng& rng, bool zero_init)
    : stride_(stride) {
  // Exact upsampling by `stride`: (h-1)s - 2p + k + op == h*s.
  pad_ = (kernel - stride + 1) / 2;
  output_pad_ = stride - kernel + 2 * pad_;
  if (output_pad_ < 0 || output_pad_ >= stride) {
    throw InvalidArgument("transposed convolution kernel " +
                          std::to_string(kernel) + " cannot upsample by " +
                          std::to_string(stride));
  }
  const Shape ws{in, out, kernel, kernel};
  const double fan_in = double(in) * kernel * kernel / (double(stride) * stride);
  weight_ = store.add(prefix + ".weight", ws,
                      zero_init ? std::vector<double>(ws.numel(), 0.0)
                                : lecun_uniform(ws.numel(), fan_in, rng));
  bias_ = store.add(prefix + ".bias", Shape{out, 1, 1, 1},
                    std::vector<double>(out, 0.0));
}

Tensor ConvTranspose2d::operator()(const Tensor& x) const {
  return ops::conv_transpose2d(x, weight_, bias_, stride_, pad_, output_pad_);
}

BatchNorm2d::BatchNorm2d(ParamStore& store, const std::string& prefix,
                         int channels) {
  const Shape s{1, channels, 1, 1};
  gamma_ = store.add(prefix + ".gamma", s, std::vector<double>(channels, 1.0));
  beta_ = store.add(prefix + ".beta", s, std::vector<double>(channels, 0.0));
  state_.running_mean = store.add(prefix + ".running_mean", s,
                                  std::vector<double>(channels, 0.0), false);
  state_.running_var = store.add(prefix + ".running_var", s,
                                 std::vector<double>(channels, 1.0), false);
}

Tensor BatchNorm2d::operator()(const Tensor& x, bool use_batch_stats) const {
  return ops::batch_norm(x, gamma_, beta_, state_, use_batch_stats);
}

ResidualBlock::ResidualBlock(ParamStore& store, const std::string& prefix,
                             int channels, bool batchnorm, Rng& rng)
    : conv_a_(store, prefix + ".conv_a", channels, channels, 3, 1, rng),
      conv_b_(store, prefix + ".conv_b", channels, channels, 3, 1, rng),
      batchnorm_(batchnorm) {
  if (batchnorm_) {
    bn_a_ = BatchNorm2d(store, prefix + ".bn_a", channels);
    bn_b_ = BatchNorm2d(store, prefix + ".bn_b", channels);
  }
}

Tensor ResidualBlock::operator()(const Tensor& x,
                                 const NormContext& norm) const {
  Tensor t = conv_a_(x);
  if (batchnorm_ && norm.enabled) t = bn_a_(t, norm.use_batch_stats);
  t = ops::relu(t);
  t = conv_b_(t);
  if (batchnorm_ && norm.enabled) t = bn_b_(t, norm.use_batch_stats);
  return ops::add(x, t);
}

ConvGru::ConvGru(ParamStore& store, const std::string& prefix, int in,
                 int hidden, int kernel, Rng& rng)
    : gates_(store, prefix + ".gates", in + hidden, 2 * hidden, kernel, 1, rng),
      candidate_(store, prefix + ".candidate", in + hidden, hidden, kernel, 1, rng),
      hidden_(hidden) {}

Tensor ConvGru::operator()(const Tensor& x, const Tensor& h) const {
  const Tensor gates = ops::sigmoid(gates_(ops::concat_channels({x, h})));
  const Tensor update = ops::slice_channels(gates, 0, hidden_);
  const Tensor reset = ops::slice_channels(gates, hidden_, hidden_);
  const Tensor cand =
      ops::tanh(candidate_(ops::concat_channels({x, ops::mul(reset, h)})));
  // h' = (1 - z) * h + z * n
  return ops::add(ops::mul(ops::rsub_scalar(1.0, update), h),
                  ops::mul(update, cand));
}

MaskedConv2d::MaskedConv2d(ParamStore& store, const std::string& prefix,
                           int in, int out, int kernel,
                           std::vector<std::uint8_t> mask, Rng& rng,
                           bool zero_init)
    : mask_(std::move(mask)) {
  const Shape ws{out, in, kernel, kernel};
  if (mask_.size() != ws.numel()) {
    throw InvalidArgument("mask size mismatch for " + prefix);
  }
  std::size_t active_per_out = 0;
  for (std::size_t i = 0; i < ws.numel() / out; ++i) active_per_out += mask_[i];
  std::vector<double> w =
      zero_init ? std::vector<double>(ws.numel(), 0.0)
                : lecun_uniform(ws.numel(),
                                std::max<double>(1.0, double(active_per_out)), rng);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!mask_[i]) w[i] = 0.0;
  }
  weight_ = store.add(prefix + ".weight", ws, std::move(w));
  bias_ = store.add(prefix + ".bias", Shape{out, 1, 1, 1},
                    std::vector<double>(out, 0.0));
}

Tensor MaskedConv2d::operator()(const Tensor& x) const {
  return ops::masked_conv2d(x, weight_, bias_, mask_);
}

Adam::Adam(std::vector<Tensor> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Tensor& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    std::span<const double> g = params_[k].grad();
    if (g.empty()) continue;
    std::span<double> w = params_[k].mutable_values();
    std::vector<double>& m = m_[k];
    std::vector<double>& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace frae::nn
