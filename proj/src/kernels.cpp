#include "worldgan/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace worldgan::kernels {

namespace {

// Zero-padded copy of a [channels][D][H][W] block, flattened so every kernel tap becomes a constant
// offset into the buffer. Output positions on the padding ring are computed and discarded.
struct PaddedLayout {
  int pad = 1;
  int pd = 0, ph = 0, pw = 0;
  std::int64_t plane = 0;
  std::int64_t total = 0;
  std::int64_t lo = 0;  // flat index of the first interior voxel
  std::int64_t hi = 0;  // one past the last interior voxel

  PaddedLayout(Shape3 s, int kernel) : pad(kernel / 2) {
    pd = s.d + 2 * pad;
    ph = s.h + 2 * pad;
    pw = s.w + 2 * pad;
    plane = static_cast<std::int64_t>(ph) * pw;
    total = plane * pd;
    lo = pad * plane + static_cast<std::int64_t>(pad) * pw + pad;
    hi = (s.d - 1 + pad) * plane + static_cast<std::int64_t>(s.h - 1 + pad) * pw + (s.w - 1 + pad) + 1;
  }

  [[nodiscard]] std::int64_t offset(int kd, int kh, int kw) const {
    return (kd - pad) * plane + static_cast<std::int64_t>(kh - pad) * pw + (kw - pad);
  }
};

std::vector<float> pad_channels(std::span<const float> src, int channels, Shape3 s,
                                const PaddedLayout& layout) {
  std::vector<float> out(static_cast<std::size_t>(channels * layout.total), 0.0f);
  const auto spatial = static_cast<std::size_t>(s.volume());
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const float* in = src.data() + c * spatial;
    float* dst = out.data() + c * layout.total;
    for (int d = 0; d < s.d; ++d) {
      for (int h = 0; h < s.h; ++h) {
        const float* row = in + (static_cast<std::size_t>(d) * s.h + h) * s.w;
        float* prow = dst + (d + layout.pad) * layout.plane +
                      static_cast<std::int64_t>(h + layout.pad) * layout.pw + layout.pad;
        std::copy(row, row + s.w, prow);
      }
    }
  }
  return out;
}

// Copies the interior of a padded accumulator (indexed from layout.lo) into a dense channel.
void extract_interior(const float* acc, float* dst, Shape3 s, const PaddedLayout& layout) {
  for (int d = 0; d < s.d; ++d) {
    for (int h = 0; h < s.h; ++h) {
      const float* prow = acc + (d + layout.pad) * layout.plane +
                          static_cast<std::int64_t>(h + layout.pad) * layout.pw + layout.pad -
                          layout.lo;
      std::copy(prow, prow + s.w, dst + (static_cast<std::size_t>(d) * s.h + h) * s.w);
    }
  }
}

std::vector<std::int64_t> tap_offsets(const PaddedLayout& layout, int k) {
  std::vector<std::int64_t> taps;
  taps.reserve(static_cast<std::size_t>(k * k * k));
  for (int kd = 0; kd < k; ++kd)
    for (int kh = 0; kh < k; ++kh)
      for (int kw = 0; kw < k; ++kw) taps.push_back(layout.offset(kd, kh, kw));
  return taps;
}

constexpr int kBlock = 4;

// acc[b][i] += sum_j coeff[b][j] * src_j[i] over one output block of up to kBlock rows.
inline void axpy_block(float* const* acc, int rows, const float* src, const float* coeffs,
                       std::int64_t coeff_stride, std::int64_t len) {
  if (rows == kBlock) {
    const float c0 = coeffs[0], c1 = coeffs[coeff_stride], c2 = coeffs[2 * coeff_stride],
                c3 = coeffs[3 * coeff_stride];
    float* __restrict a0 = acc[0];
    float* __restrict a1 = acc[1];
    float* __restrict a2 = acc[2];
    float* __restrict a3 = acc[3];
    for (std::int64_t i = 0; i < len; ++i) {
      const float v = src[i];
      a0[i] += c0 * v;
      a1[i] += c1 * v;
      a2[i] += c2 * v;
      a3[i] += c3 * v;
    }
    return;
  }
  for (int b = 0; b < rows; ++b) {
    const float c = coeffs[b * coeff_stride];
    float* __restrict a = acc[b];
    for (std::int64_t i = 0; i < len; ++i) a[i] += c * src[i];
  }
}

}  // namespace

void conv3d_forward(std::span<const float> x, std::span<const float> w, std::span<float> y,
                    const ConvShape& shape) {
  const auto s = shape.spatial;
  const int k = shape.kernel;
  const int k3 = k * k * k;
  const PaddedLayout layout(s, k);
  const auto xp = pad_channels(x, shape.in_channels, s, layout);
  const auto taps = tap_offsets(layout, k);
  const std::int64_t len = layout.hi - layout.lo;
  const auto spatial = static_cast<std::size_t>(s.volume());
  const int blocks = (shape.out_channels + kBlock - 1) / kBlock;
  const std::int64_t w_stride = static_cast<std::int64_t>(shape.in_channels) * k3;

#pragma omp parallel
  {
    std::vector<float> acc(static_cast<std::size_t>(kBlock * len));
#pragma omp for schedule(static)
    for (int blk = 0; blk < blocks; ++blk) {
      const int co0 = blk * kBlock;
      const int rows = std::min(kBlock, shape.out_channels - co0);
      std::fill(acc.begin(), acc.end(), 0.0f);
      float* rows_ptr[kBlock];
      for (int b = 0; b < kBlock; ++b) rows_ptr[b] = acc.data() + b * len;
      for (int ci = 0; ci < shape.in_channels; ++ci) {
        const float* xrow = xp.data() + ci * layout.total + layout.lo;
        const float* wbase = w.data() + co0 * w_stride + static_cast<std::int64_t>(ci) * k3;
        for (int t = 0; t < k3; ++t) {
          axpy_block(rows_ptr, rows, xrow + taps[static_cast<std::size_t>(t)], wbase + t, w_stride, len);
        }
      }
      for (int b = 0; b < rows; ++b) {
        extract_interior(rows_ptr[b], y.data() + (co0 + b) * spatial, s, layout);
      }
    }
  }
}

void conv3d_input_grad(std::span<const float> gy, std::span<const float> w, std::span<float> gx,
                       const ConvShape& shape) {
  const auto s = shape.spatial;
  const int k = shape.kernel;
  const int k3 = k * k * k;
  const PaddedLayout layout(s, k);
  const auto gyp = pad_channels(gy, shape.out_channels, s, layout);
  const auto taps = tap_offsets(layout, k);
  const std::int64_t len = layout.hi - layout.lo;
  const auto spatial = static_cast<std::size_t>(s.volume());
  const int blocks = (shape.in_channels + kBlock - 1) / kBlock;
  const std::int64_t w_co_stride = static_cast<std::int64_t>(shape.in_channels) * k3;

#pragma omp parallel
  {
    std::vector<float> acc(static_cast<std::size_t>(kBlock * len));
#pragma omp for schedule(static)
    for (int blk = 0; blk < blocks; ++blk) {
      const int ci0 = blk * kBlock;
      const int rows = std::min(kBlock, shape.in_channels - ci0);
      std::fill(acc.begin(), acc.end(), 0.0f);
      float* rows_ptr[kBlock];
      for (int b = 0; b < kBlock; ++b) rows_ptr[b] = acc.data() + b * len;
      for (int co = 0; co < shape.out_channels; ++co) {
        const float* grow = gyp.data() + co * layout.total + layout.lo;
        const float* wbase = w.data() + co * w_co_stride + static_cast<std::int64_t>(ci0) * k3;
        for (int t = 0; t < k3; ++t) {
          axpy_block(rows_ptr, rows, grow - taps[static_cast<std::size_t>(t)], wbase + t, k3, len);
        }
      }
      for (int b = 0; b < rows; ++b) {
        extract_interior(rows_ptr[b], gx.data() + (ci0 + b) * spatial, s, layout);
      }
    }
  }
}

void conv3d_weight_grad(std::span<const float> x, std::span<const float> gy, std::span<float> gw,
                        const ConvShape& shape) {
  const auto s = shape.spatial;
  const int k = shape.kernel;
  const int k3 = k * k * k;
  const PaddedLayout layout(s, k);
  const auto xp = pad_channels(x, shape.in_channels, s, layout);
  const auto gyp = pad_channels(gy, shape.out_channels, s, layout);
  const auto taps = tap_offsets(layout, k);
  const std::int64_t len = layout.hi - layout.lo;
  const int pairs = shape.out_channels * shape.in_channels;

#pragma omp parallel for schedule(static)
  for (int pair = 0; pair < pairs; ++pair) {
    const int co = pair / shape.in_channels;
    const int ci = pair % shape.in_channels;
    // gyp is zero on the padding ring, so the garbage positions inside [lo, hi) contribute nothing.
    const float* grow = gyp.data() + co * layout.total + layout.lo;
    const float* xrow = xp.data() + ci * layout.total + layout.lo;
    float* out = gw.data() + static_cast<std::int64_t>(pair) * k3;
    for (int t = 0; t < k3; ++t) {
      const float* src = xrow + taps[static_cast<std::size_t>(t)];
      std::array<float, 8> lanes{};
      std::int64_t i = 0;
      for (; i + 8 <= len; i += 8) {
        for (int l = 0; l < 8; ++l) lanes[static_cast<std::size_t>(l)] += grow[i + l] * src[i + l];
      }
      float tail = 0.0f;
      for (; i < len; ++i) tail += grow[i] * src[i];
      float sum = 0.0f;
      for (float l : lanes) sum += l;
      out[t] = sum + tail;
    }
  }
}

double resample_coordinate(int i, int from, int to) {
  if (to == 1) return (from - 1) / 2.0;
  return static_cast<double>(i) * (from - 1) / (to - 1);
}

namespace {

struct AxisTaps {
  std::vector<int> i0, i1;
  std::vector<float> w1;  // weight of i1; weight of i0 is 1 - w1
};

AxisTaps axis_taps(int from, int to) {
  AxisTaps taps;
  taps.i0.resize(static_cast<std::size_t>(to));
  taps.i1.resize(static_cast<std::size_t>(to));
  taps.w1.resize(static_cast<std::size_t>(to));
  for (int i = 0; i < to; ++i) {
    const double c = resample_coordinate(i, from, to);
    int lo = static_cast<int>(std::floor(c));
    lo = std::clamp(lo, 0, from - 1);
    const int hi = std::min(lo + 1, from - 1);
    const auto idx = static_cast<std::size_t>(i);
    taps.i0[idx] = lo;
    taps.i1[idx] = hi;
    taps.w1[idx] = static_cast<float>(c - lo);
  }
  return taps;
}

}  // namespace

void resample_trilinear(std::span<const float> src, Shape3 from, std::span<float> dst, Shape3 to,
                        int channels) {
  const auto td = axis_taps(from.d, to.d);
  const auto th = axis_taps(from.h, to.h);
  const auto tw = axis_taps(from.w, to.w);
  const auto src_spatial = static_cast<std::size_t>(from.volume());
  const auto dst_spatial = static_cast<std::size_t>(to.volume());
  const auto plane = static_cast<std::size_t>(from.h) * from.w;

#pragma omp parallel for collapse(2) schedule(static)
  for (int c = 0; c < channels; ++c) {
    for (int d = 0; d < to.d; ++d) {
      const float* in = src.data() + c * src_spatial;
      float* out = dst.data() + c * dst_spatial + static_cast<std::size_t>(d) * to.h * to.w;
      const auto di = static_cast<std::size_t>(d);
      const float wd = td.w1[di];
      const float* p0 = in + td.i0[di] * plane;
      const float* p1 = in + td.i1[di] * plane;
      for (int h = 0; h < to.h; ++h) {
        const auto hi = static_cast<std::size_t>(h);
        const float wh = th.w1[hi];
        const auto r0 = static_cast<std::size_t>(th.i0[hi]) * from.w;
        const auto r1 = static_cast<std::size_t>(th.i1[hi]) * from.w;
        for (int w = 0; w < to.w; ++w) {
          const auto wi = static_cast<std::size_t>(w);
          const auto c0 = static_cast<std::size_t>(tw.i0[wi]);
          const auto c1 = static_cast<std::size_t>(tw.i1[wi]);
          const float ww = tw.w1[wi];
          auto lerp_row = [&](const float* p, std::size_t r) {
            return p[r + c0] + ww * (p[r + c1] - p[r + c0]);
          };
          const float a = lerp_row(p0, r0) + wh * (lerp_row(p0, r1) - lerp_row(p0, r0));
          const float b = lerp_row(p1, r0) + wh * (lerp_row(p1, r1) - lerp_row(p1, r0));
          out[static_cast<std::size_t>(h) * to.w + wi] = a + wd * (b - a);
        }
      }
    }
  }
}

void nearest_rows(std::span<const float> field, std::int64_t spatial, std::span<const float> rows,
                  int k, int m, std::span<TokenId> out) {
#pragma omp parallel for schedule(static)
  for (std::int64_t v = 0; v < spatial; ++v) {
    double best = std::numeric_limits<double>::infinity();
    TokenId best_row = 0;
    for (int r = 0; r < k; ++r) {
      double dist = 0.0;
      for (int c = 0; c < m; ++c) {
        const double diff = static_cast<double>(field[static_cast<std::size_t>(c * spatial + v)]) -
                            rows[static_cast<std::size_t>(r * m + c)];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        best_row = static_cast<TokenId>(r);
      }
    }
    out[static_cast<std::size_t>(v)] = best_row;
  }
}

namespace reference {

namespace {
inline bool inside(int v, int n) { return v >= 0 && v < n; }
}  // namespace

void conv3d_forward(std::span<const float> x, std::span<const float> w, std::span<float> y,
                    const ConvShape& shape) {
  const auto s = shape.spatial;
  const int k = shape.kernel, p = k / 2;
  for (int co = 0; co < shape.out_channels; ++co)
    for (int d = 0; d < s.d; ++d)
      for (int h = 0; h < s.h; ++h)
        for (int ww = 0; ww < s.w; ++ww) {
          double acc = 0.0;
          for (int ci = 0; ci < shape.in_channels; ++ci)
            for (int kd = 0; kd < k; ++kd)
              for (int kh = 0; kh < k; ++kh)
                for (int kw = 0; kw < k; ++kw) {
                  const int sd = d + kd - p, sh = h + kh - p, sw = ww + kw - p;
                  if (!inside(sd, s.d) || !inside(sh, s.h) || !inside(sw, s.w)) continue;
                  const auto wi = (((static_cast<std::size_t>(co) * shape.in_channels + ci) * k + kd) * k + kh) * k + kw;
                  const auto xi = ((static_cast<std::size_t>(ci) * s.d + sd) * s.h + sh) * s.w + sw;
                  acc += static_cast<double>(w[wi]) * x[xi];
                }
          y[((static_cast<std::size_t>(co) * s.d + d) * s.h + h) * s.w + ww] = static_cast<float>(acc);
        }
}

void conv3d_input_grad(std::span<const float> gy, std::span<const float> w, std::span<float> gx,
                       const ConvShape& shape) {
  const auto s = shape.spatial;
  const int k = shape.kernel, p = k / 2;
  std::vector<double> acc(gx.size(), 0.0);
  for (int co = 0; co < shape.out_channels; ++co)
    for (int d = 0; d < s.d; ++d)
      for (int h = 0; h < s.h; ++h)
        for (int ww = 0; ww < s.w; ++ww) {
          const double g = gy[((static_cast<std::size_t>(co) * s.d + d) * s.h + h) * s.w + ww];
          for (int ci = 0; ci < shape.in_channels; ++ci)
            for (int kd = 0; kd < k; ++kd)
              for (int kh = 0; kh < k; ++kh)
                for (int kw = 0; kw < k; ++kw) {
                  const int sd = d + kd - p, sh = h + kh - p, sw = ww + kw - p;
                  if (!inside(sd, s.d) || !inside(sh, s.h) || !inside(sw, s.w)) continue;
                  const auto wi = (((static_cast<std::size_t>(co) * shape.in_channels + ci) * k + kd) * k + kh) * k + kw;
                  acc[((static_cast<std::size_t>(ci) * s.d + sd) * s.h + sh) * s.w + sw] += g * w[wi];
                }
        }
  for (std::size_t i = 0; i < acc.size(); ++i) gx[i] = static_cast<float>(acc[i]);
}

void conv3d_weight_grad(std::span<const float> x, std::span<const float> gy, std::span<float> gw,
                        const ConvShape& shape) {
  const auto s = shape.spatial;
  const int k = shape.kernel, p = k / 2;
  std::vector<double> acc(gw.size(), 0.0);
  for (int co = 0; co < shape.out_channels; ++co)
    for (int d = 0; d < s.d; ++d)
      for (int h = 0; h < s.h; ++h)
        for (int ww = 0; ww < s.w; ++ww) {
          const double g = gy[((static_cast<std::size_t>(co) * s.d + d) * s.h + h) * s.w + ww];
          for (int ci = 0; ci < shape.in_channels; ++ci)
            for (int kd = 0; kd < k; ++kd)
              for (int kh = 0; kh < k; ++kh)
                for (int kw = 0; kw < k; ++kw) {
                  const int sd = d + kd - p, sh = h + kh - p, sw = ww + kw - p;
                  if (!inside(sd, s.d) || !inside(sh, s.h) || !inside(sw, s.w)) continue;
                  const auto wi = (((static_cast<std::size_t>(co) * shape.in_channels + ci) * k + kd) * k + kh) * k + kw;
                  acc[wi] += g * x[((static_cast<std::size_t>(ci) * s.d + sd) * s.h + sh) * s.w + sw];
                }
        }
  for (std::size_t i = 0; i < acc.size(); ++i) gw[i] = static_cast<float>(acc[i]);
}

void resample_trilinear(std::span<const float> src, Shape3 from, std::span<float> dst, Shape3 to,
                        int channels) {
  auto corner = [](double c, int n, int& lo, int& hi) {
    lo = std::clamp(static_cast<int>(std::floor(c)), 0, n - 1);
    hi = std::min(lo + 1, n - 1);
    return c - lo;
  };
  for (int ch = 0; ch < channels; ++ch)
    for (int d = 0; d < to.d; ++d)
      for (int h = 0; h < to.h; ++h)
        for (int w = 0; w < to.w; ++w) {
          int d0, d1, h0, h1, w0, w1;
          const double fd = corner(resample_coordinate(d, from.d, to.d), from.d, d0, d1);
          const double fh = corner(resample_coordinate(h, from.h, to.h), from.h, h0, h1);
          const double fw = corner(resample_coordinate(w, from.w, to.w), from.w, w0, w1);
          double acc = 0.0;
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              for (int c = 0; c < 2; ++c) {
                const double wt = (a ? fd : 1 - fd) * (b ? fh : 1 - fh) * (c ? fw : 1 - fw);
                const int sd = a ? d1 : d0, sh = b ? h1 : h0, sw = c ? w1 : w0;
                acc += wt * src[((static_cast<std::size_t>(ch) * from.d + sd) * from.h + sh) * from.w + sw];
              }
          dst[((static_cast<std::size_t>(ch) * to.d + d) * to.h + h) * to.w + w] = static_cast<float>(acc);
        }
}

void nearest_rows(std::span<const float> field, std::int64_t spatial, std::span<const float> rows,
                  int k, int m, std::span<TokenId> out) {
  for (std::int64_t v = 0; v < spatial; ++v) {
    double best = std::numeric_limits<double>::infinity();
    TokenId best_row = 0;
    for (int r = 0; r < k; ++r) {
      double dist = 0.0;
      for (int c = 0; c < m; ++c) {
        const double diff = static_cast<double>(field[static_cast<std::size_t>(c * spatial + v)]) -
                            rows[static_cast<std::size_t>(r * m + c)];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        best_row = static_cast<TokenId>(r);
      }
    }
    out[static_cast<std::size_t>(v)] = best_row;
  }
}

}  // namespace reference

}  // namespace worldgan::kernels
