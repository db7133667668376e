#include <Eigen/Core>
#include <cmath>

#include "frae/error.hpp"
#include "frae/ops.hpp"

namespace frae::ops {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

// Geometry of a strided convolution sliding over an image of size (h, w)
// and producing a grid of size (gh, gw).
struct Window {
  int channels;
  int h, w;
  int k, stride, pad;
  int gh, gw;
};

// cols[(c*k + ky)*k + kx][gy*gw + gx] = img[c][gy*s - p + ky][gx*s - p + kx]
void im2col(const double* img, const Window& g, double* cols) {
  const int grid = g.gh * g.gw;
  for (int c = 0; c < g.channels; ++c) {
    const double* plane = img + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        double* row = cols + (static_cast<std::size_t>(c * g.k + ky) * g.k + kx) * grid;
        for (int gy = 0; gy < g.gh; ++gy) {
          const int y = gy * g.stride - g.pad + ky;
          double* dst = row + gy * g.gw;
          if (y < 0 || y >= g.h) {
            std::fill_n(dst, g.gw, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(y) * g.w;
          for (int gx = 0; gx < g.gw; ++gx) {
            const int x = gx * g.stride - g.pad + kx;
            dst[gx] = (x < 0 || x >= g.w) ? 0.0 : src[x];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates cols back into img.
void col2im(const double* cols, const Window& g, double* img) {
  const int grid = g.gh * g.gw;
  for (int c = 0; c < g.channels; ++c) {
    double* plane = img + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const double* row = cols + (static_cast<std::size_t>(c * g.k + ky) * g.k + kx) * grid;
        for (int gy = 0; gy < g.gh; ++gy) {
          const int y = gy * g.stride - g.pad + ky;
          if (y < 0 || y >= g.h) continue;
          double* dst = plane + static_cast<std::size_t>(y) * g.w;
          const double* src = row + gy * g.gw;
          for (int gx = 0; gx < g.gw; ++gx) {
            const int x = gx * g.stride - g.pad + kx;
            if (x >= 0 && x < g.w) dst[x] += src[gx];
          }
        }
      }
    }
  }
}

void check_weight(const Tensor& weight, int in_channels, bool transposed) {
  const Shape ws = weight.shape();
  const int expected_in = transposed ? ws.n : ws.c;
  if (expected_in != in_channels || ws.h != ws.w) {
    throw InvalidArgument("convolution weight " + ws.str() +
                          " incompatible with " + std::to_string(in_channels) +
                          " input channels");
  }
}

void add_bias(std::vector<double>& y, const Tensor& bias, int n, int c,
              std::size_t plane) {
  if (!bias.defined()) return;
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double v = bias.values()[ch];
      double* dst = y.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += v;
    }
  }
}

void bias_grad(const Tensor& bias, const std::vector<double>& gy, int n, int c,
               std::size_t plane) {
  if (!bias.defined()) return;
  std::span<double> gb = grad_target(bias);
  if (gb.empty()) return;
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* src = gy.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
      double total = 0.0;
      for (std::size_t i = 0; i < plane; ++i) total += src[i];
      gb[ch] += total;
    }
  }
}

std::vector<Tensor> inputs_of(const Tensor& x, const Tensor& w,
                              const Tensor& b) {
  std::vector<Tensor> in{x, w};
  if (b.defined()) in.push_back(b);
  return in;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride, int pad) {
  const Shape xs = x.shape();
  check_weight(weight, xs.c, false);
  const int co = weight.shape().n;
  const int k = weight.shape().h;
  const int ho = (xs.h + 2 * pad - k) / stride + 1;
  const int wo = (xs.w + 2 * pad - k) / stride + 1;
  if (ho <= 0 || wo <= 0) {
    throw InvalidArgument("conv2d: input " + xs.str() + " too small for kernel");
  }
  const Window g{xs.c, xs.h, xs.w, k, stride, pad, ho, wo};
  const int patch = xs.c * k * k;
  const int grid = ho * wo;
  const Shape ys{xs.n, co, ho, wo};
  std::vector<double> y(ys.numel());
  std::vector<double> cols(static_cast<std::size_t>(patch) * grid);
  ConstMapMatrix wm(weight.values().data(), co, patch);
  for (int n = 0; n < xs.n; ++n) {
    im2col(x.values().data() + static_cast<std::size_t>(n) * xs.c * xs.plane(), g,
           cols.data());
    MapMatrix ym(y.data() + static_cast<std::size_t>(n) * co * grid, co, grid);
    ym.noalias() = wm * ConstMapMatrix(cols.data(), patch, grid);
  }
  add_bias(y, bias, xs.n, co, grid);

  return Tensor::from_op(
      ys, std::move(y), inputs_of(x, weight, bias),
      [x, weight, bias, g, co, patch, grid](detail::Node& out) {
        const Shape xs = x.shape();
        std::span<double> gx = grad_target(x);
        std::span<double> gw = grad_target(weight);
        bias_grad(bias, out.grad, xs.n, co, grid);
        std::vector<double> cols(static_cast<std::size_t>(patch) * grid);
        ConstMapMatrix wm(weight.values().data(), co, patch);
        for (int n = 0; n < xs.n; ++n) {
          ConstMapMatrix gy(out.grad.data() + static_cast<std::size_t>(n) * co * grid,
                            co, grid);
          if (!gw.empty()) {
            im2col(x.values().data() + static_cast<std::size_t>(n) * xs.c * xs.plane(),
                   g, cols.data());
            MapMatrix(gw.data(), co, patch).noalias() +=
                gy * ConstMapMatrix(cols.data(), patch, grid).transpose();
          }
          if (!gx.empty()) {
            MapMatrix(cols.data(), patch, grid).noalias() = wm.transpose() * gy;
            col2im(cols.data(), g,
                   gx.data() + static_cast<std::size_t>(n) * xs.c * xs.plane());
          }
        }
      });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& weight,
                        const Tensor& bias, int stride, int pad,
                        int output_pad) {
  const Shape xs = x.shape();
  check_weight(weight, xs.c, true);
  const int co = weight.shape().c;
  const int k = weight.shape().h;
  const int ho = (xs.h - 1) * stride - 2 * pad + k + output_pad;
  const int wo = (xs.w - 1) * stride - 2 * pad + k + output_pad;
  if (ho <= 0 || wo <= 0 || output_pad >= stride) {
    throw InvalidArgument("conv_transpose2d: invalid geometry for " + xs.str());
  }
  // The transposed convolution is the adjoint of a convolution that slides
  // over the (ho, wo) output and produces the (h, w) input grid.
  const Window g{co, ho, wo, k, stride, pad, xs.h, xs.w};
  const int patch = co * k * k;
  const int grid = xs.h * xs.w;
  const Shape ys{xs.n, co, ho, wo};
  std::vector<double> y(ys.numel(), 0.0);
  std::vector<double> cols(static_cast<std::size_t>(patch) * grid);
  ConstMapMatrix wm(weight.values().data(), xs.c, patch);
  for (int n = 0; n < xs.n; ++n) {
    ConstMapMatrix xm(x.values().data() + static_cast<std::size_t>(n) * xs.c * grid,
                      xs.c, grid);
    MapMatrix(cols.data(), patch, grid).noalias() = wm.transpose() * xm;
    col2im(cols.data(), g, y.data() + static_cast<std::size_t>(n) * co * ho * wo);
  }
  add_bias(y, bias, xs.n, co, static_cast<std::size_t>(ho) * wo);

  return Tensor::from_op(
      ys, std::move(y), inputs_of(x, weight, bias),
      [x, weight, bias, g, co, patch, grid](detail::Node& out) {
        const Shape xs = x.shape();
        const std::size_t out_plane = static_cast<std::size_t>(g.h) * g.w;
        std::span<double> gx = grad_target(x);
        std::span<double> gw = grad_target(weight);
        bias_grad(bias, out.grad, xs.n, co, out_plane);
        std::vector<double> cols(static_cast<std::size_t>(patch) * grid);
        ConstMapMatrix wm(weight.values().data(), xs.c, patch);
        for (int n = 0; n < xs.n; ++n) {
          im2col(out.grad.data() + static_cast<std::size_t>(n) * co * out_plane, g,
                 cols.data());
          ConstMapMatrix cm(cols.data(), patch, grid);
          if (!gx.empty()) {
            MapMatrix(gx.data() + static_cast<std::size_t>(n) * xs.c * grid, xs.c, grid)
                .noalias() += wm * cm;
          }
          if (!gw.empty()) {
            ConstMapMatrix xm(x.values().data() + static_cast<std::size_t>(n) * xs.c * grid,
                              xs.c, grid);
            MapMatrix(gw.data(), xs.c, patch).noalias() += xm * cm.transpose();
          }
        }
      });
}

Tensor masked_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                     std::span<const std::uint8_t> mask) {
  const Shape xs = x.shape();
  check_weight(weight, xs.c, false);
  const Shape ws = weight.shape();
  if (mask.size() != ws.numel() || ws.h % 2 == 0) {
    throw InvalidArgument("masked_conv2d: mask size or kernel parity mismatch");
  }
  struct Tap {
    int ci, dy, dx;
    std::size_t widx;
  };
  // Active taps per output channel, in a fixed (ci, ky, kx) order.
  std::vector<std::vector<Tap>> taps(ws.n);
  const int r = ws.h / 2;
  for (int co = 0; co < ws.n; ++co) {
    for (int ci = 0; ci < ws.c; ++ci) {
      for (int ky = 0; ky < ws.h; ++ky) {
        for (int kx = 0; kx < ws.w; ++kx) {
          const std::size_t idx = ((static_cast<std::size_t>(co) * ws.c + ci) * ws.h + ky) * ws.w + kx;
          if (mask[idx]) taps[co].push_back({ci, ky - r, kx - r, idx});
        }
      }
    }
  }
  const Shape ys{xs.n, ws.n, xs.h, xs.w};
  std::vector<double> y(ys.numel());
  const double* xv = x.values().data();
  const double* wv = weight.values().data();
  for (int n = 0; n < xs.n; ++n) {
    for (int co = 0; co < ws.n; ++co) {
      const double b0 = bias.defined() ? bias.values()[co] : 0.0;
      for (int py = 0; py < xs.h; ++py) {
        for (int px = 0; px < xs.w; ++px) {
          double acc = b0;
          for (const Tap& t : taps[co]) {
            const int sy = py + t.dy;
            const int sx = px + t.dx;
            if (sy < 0 || sy >= xs.h || sx < 0 || sx >= xs.w) continue;
            acc += wv[t.widx] *
                   xv[((static_cast<std::size_t>(n) * xs.c + t.ci) * xs.h + sy) * xs.w + sx];
          }
          y[((static_cast<std::size_t>(n) * ws.n + co) * xs.h + py) * xs.w + px] = acc;
        }
      }
    }
  }
  return Tensor::from_op(
      ys, std::move(y), inputs_of(x, weight, bias),
      [x, weight, bias, taps](detail::Node& out) {
        const Shape xs = x.shape();
        const Shape ws = weight.shape();
        std::span<double> gx = grad_target(x);
        std::span<double> gw = grad_target(weight);
        bias_grad(bias, out.grad, xs.n, ws.n, xs.plane());
        const double* xv = x.values().data();
        const double* wv = weight.values().data();
        for (int n = 0; n < xs.n; ++n) {
          for (int co = 0; co < ws.n; ++co) {
            for (int py = 0; py < xs.h; ++py) {
              for (int px = 0; px < xs.w; ++px) {
                const double g = out.grad[((static_cast<std::size_t>(n) * ws.n + co) * xs.h + py) * xs.w + px];
                if (g == 0.0) continue;
                for (const Tap& t : taps[co]) {
                  const int sy = py + t.dy;
                  const int sx = px + t.dx;
                  if (sy < 0 || sy >= xs.h || sx < 0 || sx >= xs.w) continue;
                  const std::size_t xi = ((static_cast<std::size_t>(n) * xs.c + t.ci) * xs.h + sy) * xs.w + sx;
                  if (!gw.empty()) gw[t.widx] += g * xv[xi];
                  if (!gx.empty()) gx[xi] += g * wv[t.widx];
                }
              }
            }
          }
        }
      });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool use_batch_stats) {
  const Shape s = x.shape();
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n) * static_cast<double>(plane);
  std::vector<double> mean(s.c), inv_std(s.c);
  if (use_batch_stats) {
    for (int c = 0; c < s.c; ++c) {
      double total = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* src = x.values().data() + (static_cast<std::size_t>(n) * s.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) total += src[i];
      }
      const double m = total / count;
      double sq = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* src = x.values().data() + (static_cast<std::size_t>(n) * s.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sq += (src[i] - m) * (src[i] - m);
      }
      const double var = sq / count;
      mean[c] = m;
      inv_std[c] = 1.0 / std::sqrt(var + state.eps);
      const double unbiased = count > 1.0 ? sq / (count - 1.0) : var;
      double& rm = state.running_mean.mutable_values()[c];
      double& rv = state.running_var.mutable_values()[c];
      rm = (1.0 - state.momentum) * rm + state.momentum * m;
      rv = (1.0 - state.momentum) * rv + state.momentum * unbiased;
    }
  } else {
    for (int c = 0; c < s.c; ++c) {
      mean[c] = state.running_mean.values()[c];
      inv_std[c] = 1.0 / std::sqrt(state.running_var.values()[c] + state.eps);
    }
  }
  std::vector<double> y(s.numel());
  std::vector<double> xhat(s.numel());
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
      const double gm = gamma.values()[c];
      const double bt = beta.values()[c];
      for (std::size_t i = 0; i < plane; ++i) {
        xhat[base + i] = (x.values()[base + i] - mean[c]) * inv_std[c];
        y[base + i] = gm * xhat[base + i] + bt;
      }
    }
  }
  return Tensor::from_op(
      s, std::move(y), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std, use_batch_stats, count,
       plane](detail::Node& out) {
        const Shape s = x.shape();
        std::span<double> gx = grad_target(x);
        std::span<double> gg = grad_target(gamma);
        std::span<double> gb = grad_target(beta);
        for (int c = 0; c < s.c; ++c) {
          double sum_g = 0.0;
          double sum_gx = 0.0;
          for (int n = 0; n < s.n; ++n) {
            const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_g += out.grad[base + i];
              sum_gx += out.grad[base + i] * xhat[base + i];
            }
          }
          if (!gg.empty()) gg[c] += sum_gx;
          if (!gb.empty()) gb[c] += sum_g;
          if (gx.empty()) continue;
          const double scale = gamma.values()[c] * inv_std[c];
          for (int n = 0; n < s.n; ++n) {
            const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              if (use_batch_stats) {
                gx[base + i] += scale * (out.grad[base + i] - sum_g / count -
                                         xhat[base + i] * sum_gx / count);
              } else {
                gx[base + i] += scale * out.grad[base + i];
              }
            }
          }
        }
      });
}

}  // namespace frae::ops
