#include <algorithm>
#include <cmath>

#include "frae/error.hpp"
#include "frae/ops.hpp"

namespace frae::ops {

Tensor avg_pool2(const Tensor& x) {
  const Shape s = x.shape();
  const int ho = s.h / 2;
  const int wo = s.w / 2;
  if (ho == 0 || wo == 0) {
    throw InvalidArgument("avg_pool2: input " + s.str() + " too small");
  }
  const Shape ys{s.n, s.c, ho, wo};
  std::vector<double> y(ys.numel());
  const double* xv = x.values().data();
  for (int p = 0; p < s.n * s.c; ++p) {
    const double* src = xv + static_cast<std::size_t>(p) * s.plane();
    double* dst = y.data() + static_cast<std::size_t>(p) * ho * wo;
    for (int r = 0; r < ho; ++r) {
      for (int c = 0; c < wo; ++c) {
        const double* a = src + (2 * r) * s.w + 2 * c;
        dst[r * wo + c] = 0.25 * (a[0] + a[1] + a[s.w] + a[s.w + 1]);
      }
    }
  }
  return Tensor::from_op(ys, std::move(y), {x}, [x, ho, wo](detail::Node& out) {
    const Shape s = x.shape();
    std::span<double> gx = grad_target(x);
    for (int p = 0; p < s.n * s.c; ++p) {
      double* dst = gx.data() + static_cast<std::size_t>(p) * s.plane();
      const double* src = out.grad.data() + static_cast<std::size_t>(p) * ho * wo;
      for (int r = 0; r < ho; ++r) {
        for (int c = 0; c < wo; ++c) {
          const double g = 0.25 * src[r * wo + c];
          double* a = dst + (2 * r) * s.w + 2 * c;
          a[0] += g;
          a[1] += g;
          a[s.w] += g;
          a[s.w + 1] += g;
        }
      }
    }
  });
}

namespace {

// Source index along one axis for output position `o` and tap `t`.
struct AxisMap {
  int in_extent;
  int out_extent;
  int radius;
  bool replicate;

  int source(int o, int t) const {
    if (!replicate) return o + t;
    return std::clamp(o + t - radius, 0, in_extent - 1);
  }
};

AxisMap make_axis(int extent, int taps, BlurPadding padding) {
  const bool replicate = padding == BlurPadding::kReplicate;
  return AxisMap{extent, replicate ? extent : extent - taps + 1, taps / 2,
                 replicate};
}

}  // namespace

Tensor separable_blur(const Tensor& x, std::span<const double> taps,
                      BlurPadding padding) {
  const Shape s = x.shape();
  const int k = static_cast<int>(taps.size());
  if (k % 2 == 0) throw InvalidArgument("separable_blur: kernel must be odd");
  if (padding == BlurPadding::kValid && (s.h < k || s.w < k)) {
    throw InvalidArgument("separable_blur: input " + s.str() +
                          " smaller than kernel");
  }
  const AxisMap ax = make_axis(s.w, k, padding);
  const AxisMap ay = make_axis(s.h, k, padding);
  const Shape ys{s.n, s.c, ay.out_extent, ax.out_extent};
  std::vector<double> y(ys.numel());
  std::vector<double> tmp(static_cast<std::size_t>(s.h) * ax.out_extent);
  const std::vector<double> kernel(taps.begin(), taps.end());
  for (int p = 0; p < s.n * s.c; ++p) {
    const double* src = x.values().data() + static_cast<std::size_t>(p) * s.plane();
    for (int r = 0; r < s.h; ++r) {
      const double* row = src + static_cast<std::size_t>(r) * s.w;
      double* trow = tmp.data() + static_cast<std::size_t>(r) * ax.out_extent;
      for (int c = 0; c < ax.out_extent; ++c) {
        double acc = 0.0;
        for (int t = 0; t < k; ++t) acc += kernel[t] * row[ax.source(c, t)];
        trow[c] = acc;
      }
    }
    double* dst = y.data() + static_cast<std::size_t>(p) * ys.plane();
    for (int r = 0; r < ay.out_extent; ++r) {
      double* orow = dst + static_cast<std::size_t>(r) * ax.out_extent;
      std::fill_n(orow, ax.out_extent, 0.0);
      for (int t = 0; t < k; ++t) {
        const double* trow = tmp.data() + static_cast<std::size_t>(ay.source(r, t)) * ax.out_extent;
        const double g = kernel[t];
        for (int c = 0; c < ax.out_extent; ++c) orow[c] += g * trow[c];
      }
    }
  }
  return Tensor::from_op(
      ys, std::move(y), {x}, [x, kernel, ax, ay](detail::Node& out) {
        const Shape s = x.shape();
        const int k = static_cast<int>(kernel.size());
        std::span<double> gx = grad_target(x);
        std::vector<double> gtmp(static_cast<std::size_t>(s.h) * ax.out_extent);
        const std::size_t out_plane = static_cast<std::size_t>(ay.out_extent) * ax.out_extent;
        for (int p = 0; p < s.n * s.c; ++p) {
          std::fill(gtmp.begin(), gtmp.end(), 0.0);
          const double* gout = out.grad.data() + static_cast<std::size_t>(p) * out_plane;
          for (int r = 0; r < ay.out_extent; ++r) {
            const double* grow = gout + static_cast<std::size_t>(r) * ax.out_extent;
            for (int t = 0; t < k; ++t) {
              double* trow = gtmp.data() + static_cast<std::size_t>(ay.source(r, t)) * ax.out_extent;
              const double g = kernel[t];
              for (int c = 0; c < ax.out_extent; ++c) trow[c] += g * grow[c];
            }
          }
          double* dst = gx.data() + static_cast<std::size_t>(p) * s.plane();
          for (int r = 0; r < s.h; ++r) {
            const double* trow = gtmp.data() + static_cast<std::size_t>(r) * ax.out_extent;
            double* row = dst + static_cast<std::size_t>(r) * s.w;
            for (int c = 0; c < ax.out_extent; ++c) {
              for (int t = 0; t < k; ++t) row[ax.source(c, t)] += kernel[t] * trow[c];
            }
          }
        }
      });
}

namespace {

struct BilinearSample {
  int x0, x1, y0, y1;
  double ax, ay;
  bool x_inside, y_inside;  // false where the coordinate was clamped
};

BilinearSample sample_point(double sx, double sy, int w, int h) {
  BilinearSample s{};
  // NaN coordinates sample pixel 0 with NaN weights so the output stays NaN.
  const double cx = std::isnan(sx) ? 0.0 : std::clamp(sx, 0.0, static_cast<double>(w - 1));
  const double cy = std::isnan(sy) ? 0.0 : std::clamp(sy, 0.0, static_cast<double>(h - 1));
  s.x_inside = sx > 0.0 && sx < static_cast<double>(w - 1);
  s.y_inside = sy > 0.0 && sy < static_cast<double>(h - 1);
  s.x0 = static_cast<int>(std::floor(cx));
  s.y0 = static_cast<int>(std::floor(cy));
  s.x1 = std::min(s.x0 + 1, w - 1);
  s.y1 = std::min(s.y0 + 1, h - 1);
  s.ax = std::isnan(sx) ? sx : cx - s.x0;
  s.ay = std::isnan(sy) ? sy : cy - s.y0;
  return s;
}

}  // namespace

Tensor warp(const Tensor& image, const Tensor& flow) {
  const Shape is = image.shape();
  const Shape fs = flow.shape();
  if (fs.n != is.n || fs.c != 2 || fs.h != is.h || fs.w != is.w) {
    throw InvalidArgument("warp: flow " + fs.str() + " does not match image " +
                          is.str());
  }
  std::vector<double> y(is.numel());
  const std::size_t plane = is.plane();
  for (int n = 0; n < is.n; ++n) {
    const double* fx = flow.values().data() + static_cast<std::size_t>(n) * 2 * plane;
    const double* fy = fx + plane;
    for (int r = 0; r < is.h; ++r) {
      for (int c = 0; c < is.w; ++c) {
        const std::size_t p = static_cast<std::size_t>(r) * is.w + c;
        const BilinearSample s = sample_point(c + fx[p], r + fy[p], is.w, is.h);
        for (int ch = 0; ch < is.c; ++ch) {
          const double* img = image.values().data() + (static_cast<std::size_t>(n) * is.c + ch) * plane;
          const double top = (1.0 - s.ax) * img[s.y0 * is.w + s.x0] + s.ax * img[s.y0 * is.w + s.x1];
          const double bottom = (1.0 - s.ax) * img[s.y1 * is.w + s.x0] + s.ax * img[s.y1 * is.w + s.x1];
          y[(static_cast<std::size_t>(n) * is.c + ch) * plane + p] = (1.0 - s.ay) * top + s.ay * bottom;
        }
      }
    }
  }
  return Tensor::from_op(is, std::move(y), {image, flow}, [image, flow](detail::Node& out) {
    const Shape is = image.shape();
    const std::size_t plane = is.plane();
    std::span<double> gi = grad_target(image);
    std::span<double> gf = grad_target(flow);
    for (int n = 0; n < is.n; ++n) {
      const double* fx = flow.values().data() + static_cast<std::size_t>(n) * 2 * plane;
      const double* fy = fx + plane;
      for (int r = 0; r < is.h; ++r) {
        for (int c = 0; c < is.w; ++c) {
          const std::size_t p = static_cast<std::size_t>(r) * is.w + c;
          const BilinearSample s = sample_point(c + fx[p], r + fy[p], is.w, is.h);
          double dsx = 0.0;
          double dsy = 0.0;
          for (int ch = 0; ch < is.c; ++ch) {
            const std::size_t base = (static_cast<std::size_t>(n) * is.c + ch) * plane;
            const double g = out.grad[base + p];
            if (g == 0.0) continue;
            const double* img = image.values().data() + base;
            const double i00 = img[s.y0 * is.w + s.x0];
            const double i01 = img[s.y0 * is.w + s.x1];
            const double i10 = img[s.y1 * is.w + s.x0];
            const double i11 = img[s.y1 * is.w + s.x1];
            if (!gi.empty()) {
              gi[base + s.y0 * is.w + s.x0] += g * (1.0 - s.ay) * (1.0 - s.ax);
              gi[base + s.y0 * is.w + s.x1] += g * (1.0 - s.ay) * s.ax;
              gi[base + s.y1 * is.w + s.x0] += g * s.ay * (1.0 - s.ax);
              gi[base + s.y1 * is.w + s.x1] += g * s.ay * s.ax;
            }
            dsx += g * ((1.0 - s.ay) * (i01 - i00) + s.ay * (i11 - i10));
            dsy += g * ((1.0 - s.ax) * (i10 - i00) + s.ax * (i11 - i01));
          }
          if (!gf.empty()) {
            if (s.x_inside) gf[static_cast<std::size_t>(n) * 2 * plane + p] += dsx;
            if (s.y_inside) gf[static_cast<std::size_t>(n) * 2 * plane + plane + p] += dsy;
          }
        }
      }
    }
  });
}

}  // namespace frae::ops
