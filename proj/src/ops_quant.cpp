#include <algorithm>
#include <cmath>

#include "frae/error.hpp"
#include "frae/ops.hpp"

namespace frae::ops {

namespace {

void check_centers(const Tensor& centers) {
  const Shape s = centers.shape();
  if (s.n != 1 || s.h != 1 || s.w != 1 || s.c < 1) {
    throw InvalidArgument("codebook centers must have shape (1,L,1,1), got " +
                          s.str());
  }
}

// Fills probs[0..L) with softmax_j(-sigma * (y - c_j)^2).
void soft_weights(double y, const double* centers, int levels, double sigma,
                  double* probs) {
  double best = -INFINITY;
  for (int j = 0; j < levels; ++j) {
    const double d = y - centers[j];
    probs[j] = -sigma * d * d;
    best = std::max(best, probs[j]);
  }
  double total = 0.0;
  for (int j = 0; j < levels; ++j) {
    probs[j] = std::exp(probs[j] - best);
    total += probs[j];
  }
  for (int j = 0; j < levels; ++j) probs[j] /= total;
}

}  // namespace

int nearest_center(double value, const double* centers, int levels) {
  int best = 0;
  double best_d = (value - centers[0]) * (value - centers[0]);
  for (int j = 1; j < levels; ++j) {
    const double d = (value - centers[j]) * (value - centers[j]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

Tensor soft_assignment(const Tensor& y, const Tensor& centers, double sigma) {
  check_centers(centers);
  const Shape s = y.shape();
  const int levels = centers.shape().c;
  const std::size_t plane = s.plane();
  const Shape ps{s.n, s.c * levels, s.h, s.w};
  std::vector<double> probs(ps.numel());
  std::vector<double> scratch(levels);
  const double* cv = centers.values().data();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        const double v = y.values()[(static_cast<std::size_t>(n) * s.c + c) * plane + p];
        soft_weights(v, cv, levels, sigma, scratch.data());
        for (int j = 0; j < levels; ++j) {
          probs[((static_cast<std::size_t>(n) * s.c + c) * levels + j) * plane + p] = scratch[j];
        }
      }
    }
  }
  return Tensor::from_op(
      ps, std::move(probs), {y, centers},
      [y, centers, sigma, levels](detail::Node& out) {
        const Shape s = y.shape();
        const std::size_t plane = s.plane();
        std::span<double> gy = grad_target(y);
        std::span<double> gc = grad_target(centers);
        const double* cv = centers.values().data();
        for (int n = 0; n < s.n; ++n) {
          for (int c = 0; c < s.c; ++c) {
            for (std::size_t p = 0; p < plane; ++p) {
              const std::size_t yi = (static_cast<std::size_t>(n) * s.c + c) * plane + p;
              const double v = y.values()[yi];
              double dot = 0.0;
              for (int j = 0; j < levels; ++j) {
                const std::size_t pi = ((static_cast<std::size_t>(n) * s.c + c) * levels + j) * plane + p;
                dot += out.value[pi] * out.grad[pi];
              }
              for (int j = 0; j < levels; ++j) {
                const std::size_t pi = ((static_cast<std::size_t>(n) * s.c + c) * levels + j) * plane + p;
                const double dlogit = out.value[pi] * (out.grad[pi] - dot);
                const double dist = v - cv[j];
                if (!gy.empty()) gy[yi] += dlogit * (-2.0 * sigma * dist);
                if (!gc.empty()) gc[j] += dlogit * (2.0 * sigma * dist);
              }
            }
          }
        }
      });
}

Tensor quantize_straight_through(const Tensor& y, const Tensor& centers,
                                 double sigma) {
  check_centers(centers);
  const int levels = centers.shape().c;
  const double* cv = centers.values().data();
  std::vector<double> hard(y.numel());
  for (std::size_t i = 0; i < hard.size(); ++i) {
    const double v = y.values()[i];
    const int best = nearest_center(v, cv, levels);
    hard[i] = cv[best];
  }
  return Tensor::from_op(
      y.shape(), std::move(hard), {y, centers},
      [y, centers, sigma, levels](detail::Node& out) {
        std::span<double> gy = grad_target(y);
        std::span<double> gc = grad_target(centers);
        const double* cv = centers.values().data();
        std::vector<double> s(levels);
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
          const double g = out.grad[i];
          if (g == 0.0) continue;
          const double v = y.values()[i];
          soft_weights(v, cv, levels, sigma, s.data());
          double mixture = 0.0;
          double mean_a = 0.0;
          for (int j = 0; j < levels; ++j) {
            mixture += cv[j] * s[j];
            mean_a += s[j] * (-2.0 * sigma * (v - cv[j]));
          }
          if (!gy.empty()) {
            double d = 0.0;
            for (int j = 0; j < levels; ++j) {
              d += cv[j] * s[j] * (-2.0 * sigma * (v - cv[j]) - mean_a);
            }
            gy[i] += g * d;
          }
          if (!gc.empty()) {
            for (int k = 0; k < levels; ++k) {
              gc[k] += g * (s[k] + s[k] * 2.0 * sigma * (v - cv[k]) * (cv[k] - mixture));
            }
          }
        }
      });
}

Tensor log_softmax_groups(const Tensor& x, int group) {
  const Shape s = x.shape();
  if (group < 1 || s.c % group != 0) {
    throw InvalidArgument("log_softmax_groups: channel count " +
                          std::to_string(s.c) + " not divisible by " +
                          std::to_string(group));
  }
  const int groups = s.c / group;
  const std::size_t plane = s.plane();
  std::vector<double> y(s.numel());
  for (int n = 0; n < s.n; ++n) {
    for (int g = 0; g < groups; ++g) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + g * group) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        double best = -INFINITY;
        for (int j = 0; j < group; ++j) best = std::max(best, x.values()[base + j * plane + p]);
        double total = 0.0;
        for (int j = 0; j < group; ++j) total += std::exp(x.values()[base + j * plane + p] - best);
        const double lse = best + std::log(total);
        for (int j = 0; j < group; ++j) y[base + j * plane + p] = x.values()[base + j * plane + p] - lse;
      }
    }
  }
  return Tensor::from_op(s, std::move(y), {x}, [x, group](detail::Node& out) {
    const Shape s = x.shape();
    const int groups = s.c / group;
    const std::size_t plane = s.plane();
    std::span<double> gx = grad_target(x);
    for (int n = 0; n < s.n; ++n) {
      for (int g = 0; g < groups; ++g) {
        const std::size_t base = (static_cast<std::size_t>(n) * s.c + g * group) * plane;
        for (std::size_t p = 0; p < plane; ++p) {
          double total = 0.0;
          for (int j = 0; j < group; ++j) total += out.grad[base + j * plane + p];
          for (int j = 0; j < group; ++j) {
            const std::size_t i = base + j * plane + p;
            gx[i] += out.grad[i] - std::exp(out.value[i]) * total;
          }
        }
      }
    }
  });
}

}  // namespace frae::ops
