#pragma once

#include <functional>
#include <random>
#include <vector>

#include "frae/tensor.hpp"

namespace frae::test {

inline Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0, bool requires_grad = true) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(s.numel());
  for (double& x : v) x = d(rng);
  Tensor t(s, std::move(v));
  t.set_requires_grad(requires_grad);
  return t;
}

/// Largest relative discrepancy between autograd and central differences of
/// sum(f(inputs) * probe), where probe is a fixed random weighting.
inline double gradcheck(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                        std::vector<Tensor> inputs, std::uint64_t seed = 7,
                        double eps = 1e-6) {
  std::mt19937_64 rng(seed);
  Tensor out0;
  {
    NoGradGuard g;
    out0 = f(inputs);
  }
  const Tensor probe = random_tensor(out0.shape(), rng, -1.0, 1.0, false);
  auto objective = [&]() {
    const Tensor out = f(inputs);
    double s = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) s += out.values()[i] * probe.values()[i];
    return s;
  };
  for (Tensor& t : inputs) t.zero_grad();
  {
    const Tensor out = f(inputs);
    const std::vector<double> weights(probe.values().begin(), probe.values().end());
    // Scalar node whose backward seeds out.grad with the probe weights.
    Tensor weighted = Tensor::from_op(
        Shape{}, {0.0}, {out}, [out, weights](detail::Node& node) {
          auto g = grad_target(out);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[0] * weights[i];
        });
    weighted.backward();
  }
  double worst = 0.0;
  for (Tensor& t : inputs) {
    if (!t.requires_grad()) continue;
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    if (analytic.empty()) analytic.assign(t.numel(), 0.0);
    NoGradGuard g;
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double orig = t.values()[i];
      t.mutable_values()[i] = orig + eps;
      const double up = objective();
      t.mutable_values()[i] = orig - eps;
      const double down = objective();
      t.mutable_values()[i] = orig;
      const double numeric = (up - down) / (2 * eps);
      const double scale = std::max({1.0, std::abs(numeric), std::abs(analytic[i])});
      worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
    }
  }
  return worst;
}

}  // namespace frae::test
