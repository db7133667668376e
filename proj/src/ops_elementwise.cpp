#include <algorithm>
#include <cmath>

#include "frae/error.hpp"
#include "frae/ops.hpp"

namespace frae::ops {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " +
                          a.shape().str() + " vs " + b.shape().str());
  }
}

// `derivative(x, y)` returns dy/dx for input x and output y.
template <class Forward, class Derivative>
Tensor unary(const Tensor& a, Forward forward, Derivative derivative) {
  std::span<const double> x = a.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
  return Tensor::from_op(a.shape(), std::move(y), {a},
                         [a, derivative](detail::Node& out) {
                           std::span<double> ga = grad_target(a);
                           std::span<const double> xa = a.values();
                           for (std::size_t i = 0; i < ga.size(); ++i) {
                             ga[i] += out.grad[i] *
                                      derivative(xa[i], out.value[i]);
                           }
                         });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] + b.values()[i];
  return Tensor::from_op(a.shape(), std::move(y), {a, b},
                         [a, b](detail::Node& out) {
                           for (const Tensor* t : {&a, &b}) {
                             std::span<double> g = grad_target(*t);
                             for (std::size_t i = 0; i < g.size(); ++i) {
                               g[i] += out.grad[i];
                             }
                           }
                         });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] - b.values()[i];
  return Tensor::from_op(a.shape(), std::move(y), {a, b},
                         [a, b](detail::Node& out) {
                           std::span<double> ga = grad_target(a);
                           for (std::size_t i = 0; i < ga.size(); ++i) {
                             ga[i] += out.grad[i];
                           }
                           std::span<double> gb = grad_target(b);
                           for (std::size_t i = 0; i < gb.size(); ++i) {
                             gb[i] -= out.grad[i];
                           }
                         });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] * b.values()[i];
  return Tensor::from_op(a.shape(), std::move(y), {a, b},
                         [a, b](detail::Node& out) {
                           std::span<double> ga = grad_target(a);
                           for (std::size_t i = 0; i < ga.size(); ++i) {
                             ga[i] += out.grad[i] * b.values()[i];
                           }
                           std::span<double> gb = grad_target(b);
                           for (std::size_t i = 0; i < gb.size(); ++i) {
                             gb[i] += out.grad[i] * a.values()[i];
                           }
                         });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] / b.values()[i];
  return Tensor::from_op(a.shape(), std::move(y), {a, b},
                         [a, b](detail::Node& out) {
                           std::span<double> ga = grad_target(a);
                           for (std::size_t i = 0; i < ga.size(); ++i) {
                             ga[i] += out.grad[i] / b.values()[i];
                           }
                           std::span<double> gb = grad_target(b);
                           for (std::size_t i = 0; i < gb.size(); ++i) {
                             gb[i] -= out.grad[i] * out.value[i] / b.values()[i];
                           }
                         });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; },
               [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x * s; },
               [s](double, double) { return s; });
}

Tensor rsub_scalar(double s, const Tensor& a) {
  return unary(a, [s](double x) { return s - x; },
               [](double, double) { return -1.0; });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Tensor abs(const Tensor& a) {
  return unary(a, [](double x) { return std::fabs(x); },
               [](double x, double) {
                 return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
               });
}

Tensor pow_scalar(const Tensor& a, double p) {
  return unary(a, [p](double x) { return std::pow(x, p); },
               [p](double x, double) {
                 return x > 0.0 ? p * std::pow(x, p - 1.0) : 0.0;
               });
}

Tensor relu(const Tensor& a) {
  // NaN passes through.
  return unary(a, [](double x) { return x < 0.0 ? 0.0 : x; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(a, [slope](double x) { return x < 0.0 ? slope * x : x; },
               [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor clamp_straight_through(const Tensor& a, double lo, double hi) {
  return unary(a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [](double, double) { return 1.0; });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return Tensor::from_op(Shape{}, {total}, {a}, [a](detail::Node& out) {
    std::span<double> ga = grad_target(a);
    for (double& g : ga) g += out.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor spatial_mean(const Tensor& a) {
  const Shape s = a.shape();
  const std::size_t plane = s.plane();
  std::vector<double> y(static_cast<std::size_t>(s.n) * s.c);
  for (std::size_t p = 0; p < y.size(); ++p) {
    double total = 0.0;
    for (std::size_t i = 0; i < plane; ++i) total += a.values()[p * plane + i];
    y[p] = total / static_cast<double>(plane);
  }
  return Tensor::from_op(Shape{s.n, s.c, 1, 1}, std::move(y), {a},
                         [a, plane](detail::Node& out) {
                           std::span<double> ga = grad_target(a);
                           const double inv = 1.0 / static_cast<double>(plane);
                           for (std::size_t p = 0; p < out.grad.size(); ++p) {
                             const double g = out.grad[p] * inv;
                             for (std::size_t i = 0; i < plane; ++i) {
                               ga[p * plane + i] += g;
                             }
                           }
                         });
}

Tensor channel_mean(const Tensor& a) {
  const Shape s = a.shape();
  const std::size_t plane = s.plane();
  std::vector<double> y(static_cast<std::size_t>(s.n) * plane, 0.0);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* src = a.values().data() + (static_cast<std::size_t>(n) * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) y[n * plane + i] += src[i];
    }
  }
  for (double& v : y) v /= static_cast<double>(s.c);
  return Tensor::from_op(
      Shape{s.n, 1, s.h, s.w}, std::move(y), {a}, [a](detail::Node& out) {
        const Shape s = a.shape();
        const std::size_t plane = s.plane();
        std::span<double> ga = grad_target(a);
        const double inv = 1.0 / static_cast<double>(s.c);
        for (int n = 0; n < s.n; ++n) {
          for (int c = 0; c < s.c; ++c) {
            double* dst = ga.data() + (static_cast<std::size_t>(n) * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              dst[i] += out.grad[n * plane + i] * inv;
            }
          }
        }
      });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_channels: no inputs");
  const Shape first = parts.front().shape();
  int channels = 0;
  for (const Tensor& p : parts) {
    const Shape s = p.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw InvalidArgument("concat_channels: shape mismatch " + s.str() +
                            " vs " + first.str());
    }
    channels += s.c;
  }
  const Shape out_shape{first.n, channels, first.h, first.w};
  const std::size_t plane = first.plane();
  std::vector<double> y(out_shape.numel());
  int offset = 0;
  for (const Tensor& p : parts) {
    const int pc = p.shape().c;
    for (int n = 0; n < first.n; ++n) {
      std::copy_n(p.values().data() + static_cast<std::size_t>(n) * pc * plane,
                  pc * plane,
                  y.data() + (static_cast<std::size_t>(n) * channels + offset) * plane);
    }
    offset += pc;
  }
  return Tensor::from_op(
      out_shape, std::move(y), parts, [parts, channels, plane](detail::Node& out) {
        int offset = 0;
        for (const Tensor& p : parts) {
          const int pc = p.shape().c;
          std::span<double> g = grad_target(p);
          if (!g.empty()) {
            for (int n = 0; n < p.shape().n; ++n) {
              const double* src =
                  out.grad.data() + (static_cast<std::size_t>(n) * channels + offset) * plane;
              double* dst = g.data() + static_cast<std::size_t>(n) * pc * plane;
              for (std::size_t i = 0; i < pc * plane; ++i) dst[i] += src[i];
            }
          }
          offset += pc;
        }
      });
}

Tensor slice_channels(const Tensor& a, int start, int count) {
  const Shape s = a.shape();
  if (start < 0 || count <= 0 || start + count > s.c) {
    throw InvalidArgument("slice_channels: range out of bounds for " + s.str());
  }
  const std::size_t plane = s.plane();
  std::vector<double> y(static_cast<std::size_t>(s.n) * count * plane);
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(a.values().data() + (static_cast<std::size_t>(n) * s.c + start) * plane,
                count * plane, y.data() + static_cast<std::size_t>(n) * count * plane);
  }
  return Tensor::from_op(
      Shape{s.n, count, s.h, s.w}, std::move(y), {a},
      [a, start, count, plane](detail::Node& out) {
        const Shape s = a.shape();
        std::span<double> ga = grad_target(a);
        for (int n = 0; n < s.n; ++n) {
          double* dst = ga.data() + (static_cast<std::size_t>(n) * s.c + start) * plane;
          const double* src = out.grad.data() + static_cast<std::size_t>(n) * count * plane;
          for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
        }
      });
}

Tensor slice_batch(const Tensor& a, int index) {
  const Shape s = a.shape();
  if (index < 0 || index >= s.n) {
    throw InvalidArgument("slice_batch: index out of bounds for " + s.str());
  }
  const std::size_t item = static_cast<std::size_t>(s.c) * s.plane();
  std::vector<double> y(a.values().begin() + index * item,
                        a.values().begin() + (index + 1) * item);
  return Tensor::from_op(Shape{1, s.c, s.h, s.w}, std::move(y), {a},
                         [a, index, item](detail::Node& out) {
                           std::span<double> ga = grad_target(a);
                           for (std::size_t i = 0; i < item; ++i) {
                             ga[index * item + i] += out.grad[i];
                           }
                         });
}

Tensor crop(const Tensor& a, int top, int left, int height, int width) {
  const Shape s = a.shape();
  if (top < 0 || left < 0 || height <= 0 || width <= 0 || top + height > s.h ||
      left + width > s.w) {
    throw InvalidArgument("crop: window out of bounds for " + s.str());
  }
  const Shape os{s.n, s.c, height, width};
  std::vector<double> y(os.numel());
  for (int p = 0; p < s.n * s.c; ++p) {
    for (int r = 0; r < height; ++r) {
      std::copy_n(a.values().data() + (static_cast<std::size_t>(p) * s.h + top + r) * s.w + left,
                  width, y.data() + (static_cast<std::size_t>(p) * height + r) * width);
    }
  }
  return Tensor::from_op(os, std::move(y), {a},
                         [a, top, left, height, width](detail::Node& out) {
                           const Shape s = a.shape();
                           std::span<double> ga = grad_target(a);
                           for (int p = 0; p < s.n * s.c; ++p) {
                             for (int r = 0; r < height; ++r) {
                               double* dst = ga.data() + (static_cast<std::size_t>(p) * s.h + top + r) * s.w + left;
                               const double* src = out.grad.data() + (static_cast<std::size_t>(p) * height + r) * width;
                               for (int x = 0; x < width; ++x) dst[x] += src[x];
                             }
                           }
                         });
}

}  // namespace frae::ops
