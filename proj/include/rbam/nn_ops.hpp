#pragma once

// Network primitives over (C, H, W) feature maps: convolution, first- and
// second-order pooling, row-wise convolution, sub-pixel shuffle and nearest
// upsampling. All ops are differentiable through rbam::Tensor.

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "rbam/tensor.hpp"

namespace rbam {

struct Padding {
  std::size_t top = 0;
  std::size_t bottom = 0;
  std::size_t left = 0;
  std::size_t right = 0;

  static Padding uniform(std::size_t p) { return {p, p, p, p}; }
  // Keeps spatial extents for an odd square kernel at stride 1.
  static Padding same(std::size_t kernel) { return uniform(kernel / 2); }
};

namespace detail {

inline void require_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(s));
  }
}

struct ConvGeometry {
  std::size_t cin, h, w, cout, kh, kw, out_h, out_w;
  Padding pad;

  std::size_t patch() const { return cin * kh * kw; }
  bool pointwise() const {
    return kh == 1 && kw == 1 && pad.top == 0 && pad.bottom == 0 && pad.left == 0 && pad.right == 0;
  }
  // Output rows per im2col block, bounding the column buffer to ~2^20 values.
  std::size_t rows_per_block() const {
    const std::size_t per_row = std::max<std::size_t>(1, patch() * out_w);
    return std::clamp<std::size_t>((std::size_t{1} << 20) / per_row, 1, out_h);
  }
};

// Column matrix [cin*kh*kw, (r1-r0)*out_w] for output rows [r0, r1).
template <class T>
void im2col(const T* x, const ConvGeometry& g, std::size_t r0, std::size_t r1, T* col) {
  const std::size_t cols = (r1 - r0) * g.out_w;
  for (std::size_t c = 0; c < g.cin; ++c) {
    const T* plane = x + c * g.h * g.w;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* dst = col + ((c * g.kh + ki) * g.kw + kj) * cols;
        for (std::size_t oy = r0; oy < r1; ++oy, dst += g.out_w) {
          const auto iy = static_cast<std::ptrdiff_t>(oy + ki) - static_cast<std::ptrdiff_t>(g.pad.top);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill_n(dst, g.out_w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox + kj) - static_cast<std::ptrdiff_t>(g.pad.left);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* col, const ConvGeometry& g, std::size_t r0, std::size_t r1, T* dx) {
  const std::size_t cols = (r1 - r0) * g.out_w;
  for (std::size_t c = 0; c < g.cin; ++c) {
    T* plane = dx + c * g.h * g.w;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* src = col + ((c * g.kh + ki) * g.kw + kj) * cols;
        for (std::size_t oy = r0; oy < r1; ++oy, src += g.out_w) {
          const auto iy = static_cast<std::ptrdiff_t>(oy + ki) - static_cast<std::ptrdiff_t>(g.pad.top);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox + kj) - static_cast<std::ptrdiff_t>(g.pad.left);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Centered second-moment matrix of the rows of m: (1/N) * Mc * Mc^T, with
// Mc = m minus each row's mean. Backward projects through the centering.
template <class T>
Tensor<T> row_covariance(const Tensor<T>& m) {
  require_rank(m.shape(), 2, "row_covariance");
  const auto r = static_cast<Eigen::Index>(m.shape()[0]);
  const auto n = static_cast<Eigen::Index>(m.shape()[1]);
  if (n < 2) throw DegenerateInputError("covariance needs at least 2 samples per row");
  MatrixRM<T> centered = ConstMapRM<T>(m.data().data(), r, n);
  centered.colwise() -= centered.rowwise().mean();
  Buffer<T> out(static_cast<std::size_t>(r * r));
  const T inv_n = T(1) / static_cast<T>(n);
  MapRM<T> cov(out.data(), r, r);
  cov.noalias() = (centered * centered.transpose()) * inv_n;
  cov.template triangularView<Eigen::StrictlyLower>() = cov.transpose();
  return make_result<T>(
      "row_covariance", {static_cast<std::size_t>(r), static_cast<std::size_t>(r)}, std::move(out),
      {&m}, [r, n, inv_n](Node<T>& self) {
        MatrixRM<T> centered = ConstMapRM<T>(self.inputs[0]->value.data(), r, n);
        centered.colwise() -= centered.rowwise().mean();
        ConstMapRM<T> g(self.grad.data(), r, r);
        MatrixRM<T> d = ((g + g.transpose()) * centered) * inv_n;
        d.colwise() -= d.rowwise().mean();
        MapRM<T>(input_grad(self, 0), r, n) += d;
      });
}

}  // namespace detail

// Stride-1 cross-correlation with zero padding.
// x: (C_in, H, W); weight: (C_out, C_in, k_h, k_w); bias: (C_out).
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, Padding pad) {
  detail::require_rank(x.shape(), 3, "conv2d input");
  detail::require_rank(weight.shape(), 4, "conv2d weight");
  const auto& ws = weight.shape();
  const auto& xs = x.shape();
  if (ws[1] != xs[0]) {
    throw ShapeError("conv2d: weight expects " + std::to_string(ws[1]) + " input channels, input has " +
                     std::to_string(xs[0]));
  }
  if (bias.numel() != ws[0]) throw ShapeError("conv2d: bias length must equal output channels");
  const std::size_t padded_h = xs[1] + pad.top + pad.bottom;
  const std::size_t padded_w = xs[2] + pad.left + pad.right;
  if (ws[2] > padded_h || ws[3] > padded_w) {
    throw ShapeError("conv2d: kernel " + to_string(ws) + " larger than padded input " + to_string(xs));
  }
  const detail::ConvGeometry g{xs[0], xs[1], xs[2], ws[0], ws[2], ws[3],
                               padded_h - ws[2] + 1, padded_w - ws[3] + 1, pad};
  const auto cout = static_cast<Eigen::Index>(g.cout);
  const auto k = static_cast<Eigen::Index>(g.patch());
  const auto hw = static_cast<Eigen::Index>(g.out_h * g.out_w);

  Buffer<T> out(g.cout * g.out_h * g.out_w);
  detail::MapRM<T> out_m(out.data(), cout, hw);
  detail::ConstMapRM<T> w_m(weight.data().data(), cout, k);
  if (g.pointwise()) {
    out_m.noalias() = w_m * detail::ConstMapRM<T>(x.data().data(), k, hw);
  } else {
    const std::size_t block = g.rows_per_block();
    Buffer<T> col(g.patch() * block * g.out_w);
    for (std::size_t r0 = 0; r0 < g.out_h; r0 += block) {
      const std::size_t r1 = std::min(g.out_h, r0 + block);
      const auto cols = static_cast<Eigen::Index>((r1 - r0) * g.out_w);
      detail::im2col(x.data().data(), g, r0, r1, col.data());
      out_m.middleCols(static_cast<Eigen::Index>(r0 * g.out_w), cols).noalias() =
          w_m * detail::ConstMapRM<T>(col.data(), k, cols);
    }
  }
  const auto b = bias.data();
  for (Eigen::Index c = 0; c < cout; ++c) out_m.row(c).array() += b[static_cast<std::size_t>(c)];

  return detail::make_result<T>(
      "conv2d", {g.cout, g.out_h, g.out_w}, std::move(out), {&x, &weight, &bias},
      [g, cout, k, hw](Node<T>& self) {
        const T* xv = self.inputs[0]->value.data();
        detail::ConstMapRM<T> w_m(self.inputs[1]->value.data(), cout, k);
        detail::ConstMapRM<T> dout(self.grad.data(), cout, hw);
        T* gx = detail::input_grad(self, 0);
        T* gw = detail::input_grad(self, 1);
        if (T* gb = detail::input_grad(self, 2)) {
          for (Eigen::Index c = 0; c < cout; ++c) gb[c] += dout.row(c).sum();
        }
        if (g.pointwise()) {
          if (gw) detail::MapRM<T>(gw, cout, k).noalias() += dout * detail::ConstMapRM<T>(xv, k, hw).transpose();
          if (gx) detail::MapRM<T>(gx, k, hw).noalias() += w_m.transpose() * dout;
          return;
        }
        if (!gw && !gx) return;
        const std::size_t block = g.rows_per_block();
        Buffer<T> col(g.patch() * block * g.out_w);
        detail::MatrixRM<T> dcol;
        for (std::size_t r0 = 0; r0 < g.out_h; r0 += block) {
          const std::size_t r1 = std::min(g.out_h, r0 + block);
          const auto cols = static_cast<Eigen::Index>((r1 - r0) * g.out_w);
          const auto dblock = dout.middleCols(static_cast<Eigen::Index>(r0 * g.out_w), cols);
          if (gw) {
            detail::im2col(xv, g, r0, r1, col.data());
            detail::MapRM<T>(gw, cout, k).noalias() +=
                dblock * detail::ConstMapRM<T>(col.data(), k, cols).transpose();
          }
          if (gx) {
            dcol.noalias() = w_m.transpose() * dblock;
            detail::col2im_add(dcol.data(), g, r0, r1, gx);
          }
        }
      });
}

// Spatial mean per channel: (C, H, W) -> (C, 1, 1).
template <class T>
Tensor<T> channel_avg_pool_spatial(const Tensor<T>& x) {
  detail::require_rank(x.shape(), 3, "channel_avg_pool_spatial");
  const std::size_t c = x.shape()[0];
  const std::size_t hw = x.shape()[1] * x.shape()[2];
  const auto in = x.data();
  Buffer<T> out(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    T s = 0;
    for (std::size_t i = 0; i < hw; ++i) s += in[ch * hw + i];
    out[ch] = s / static_cast<T>(hw);
  }
  return detail::make_result<T>("channel_avg_pool_spatial", {c, 1, 1}, std::move(out), {&x},
                                [c, hw](Node<T>& self) {
                                  T* gx = detail::input_grad(self, 0);
                                  for (std::size_t ch = 0; ch < c; ++ch) {
                                    const T g = self.grad[ch] / static_cast<T>(hw);
                                    for (std::size_t i = 0; i < hw; ++i) gx[ch * hw + i] += g;
                                  }
                                });
}

// Mean across channels per pixel: (C, H, W) -> (1, H, W).
template <class T>
Tensor<T> spatial_avg_pool_channel(const Tensor<T>& x) {
  detail::require_rank(x.shape(), 3, "spatial_avg_pool_channel");
  const std::size_t c = x.shape()[0];
  const std::size_t hw = x.shape()[1] * x.shape()[2];
  const auto in = x.data();
  Buffer<T> out(hw, T(0));
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) out[i] += in[ch * hw + i];
  for (auto& v : out) v /= static_cast<T>(c);
  return detail::make_result<T>("spatial_avg_pool_channel", {1, x.shape()[1], x.shape()[2]}, std::move(out),
                                {&x}, [c, hw](Node<T>& self) {
                                  T* gx = detail::input_grad(self, 0);
                                  for (std::size_t ch = 0; ch < c; ++ch)
                                    for (std::size_t i = 0; i < hw; ++i)
                                      gx[ch * hw + i] += self.grad[i] / static_cast<T>(c);
                                });
}

// Average pooling onto an out_h x out_w grid. Cell (i, j) covers rows
// [floor(i*H/out_h), ceil((i+1)*H/out_h)) and the analogous columns.
template <class T>
Tensor<T> adaptive_avg_pool(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  detail::require_rank(x.shape(), 3, "adaptive_avg_pool");
  const std::size_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  if (out_h == 0 || out_w == 0 || out_h > h || out_w > w) {
    throw ShapeError("adaptive_avg_pool: output " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                     " must be non-empty and no larger than input " + to_string(x.shape()));
  }
  auto window = [](std::size_t i, std::size_t in, std::size_t out) {
    return std::pair{i * in / out, ((i + 1) * in + out - 1) / out};
  };
  const auto in = x.data();
  Buffer<T> out(c * out_h * out_w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < out_h; ++i) {
      const auto [y0, y1] = window(i, h, out_h);
      for (std::size_t j = 0; j < out_w; ++j) {
        const auto [x0, x1] = window(j, w, out_w);
        T s = 0;
        for (std::size_t y = y0; y < y1; ++y)
          for (std::size_t xx = x0; xx < x1; ++xx) s += in[(ch * h + y) * w + xx];
        out[(ch * out_h + i) * out_w + j] = s / static_cast<T>((y1 - y0) * (x1 - x0));
      }
    }
  }
  return detail::make_result<T>(
      "adaptive_avg_pool", {c, out_h, out_w}, std::move(out), {&x},
      [c, h, w, out_h, out_w, window](Node<T>& self) {
        T* gx = detail::input_grad(self, 0);
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t i = 0; i < out_h; ++i) {
            const auto [y0, y1] = window(i, h, out_h);
            for (std::size_t j = 0; j < out_w; ++j) {
              const auto [x0, x1] = window(j, w, out_w);
              const T g = self.grad[(ch * out_h + i) * out_w + j] / static_cast<T>((y1 - y0) * (x1 - x0));
              for (std::size_t y = y0; y < y1; ++y)
                for (std::size_t xx = x0; xx < x1; ++xx) gx[(ch * h + y) * w + xx] += g;
            }
          }
        }
      });
}

// Channel covariance (C, H, W) -> (C, C), normalized by H*W.
template <class T>
Tensor<T> channel_covariance(const Tensor<T>& x) {
  detail::require_rank(x.shape(), 3, "channel_covariance");
  const std::size_t hw = x.shape()[1] * x.shape()[2];
  if (hw < 2) throw DegenerateInputError("channel_covariance needs H*W >= 2");
  return detail::row_covariance(reshape(x, {x.shape()[0], hw}));
}

// Covariance between spatial positions (C, H', W') -> (H'W', H'W'), each
// position described by its length-C channel vector, normalized by C.
template <class T>
Tensor<T> spatial_covariance(const Tensor<T>& x) {
  detail::require_rank(x.shape(), 3, "spatial_covariance");
  if (x.shape()[0] < 2) throw DegenerateInputError("spatial_covariance needs C >= 2");
  const std::size_t hw = x.shape()[1] * x.shape()[2];
  return detail::row_covariance(transpose(reshape(x, {x.shape()[0], hw})));
}

// One shared 1xK filter applied to every row: out[i] = sum_j w[j]*sigma[i,j] + b.
template <class T>
Tensor<T> rowwise_conv(const Tensor<T>& sigma, const Tensor<T>& w, const Tensor<T>& b) {
  detail::require_rank(sigma.shape(), 2, "rowwise_conv");
  const std::size_t rows = sigma.shape()[0];
  const std::size_t k = sigma.shape()[1];
  if (w.numel() != k) {
    throw ShapeError("rowwise_conv: kernel length " + std::to_string(w.numel()) + " differs from row length " +
                     std::to_string(k));
  }
  if (b.numel() != 1) throw ShapeError("rowwise_conv: bias must be a single value");
  const auto s = sigma.data();
  const auto wv = w.data();
  const T bias = b.data()[0];
  Buffer<T> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    T acc = 0;
    for (std::size_t j = 0; j < k; ++j) acc += wv[j] * s[i * k + j];
    out[i] = acc + bias;
  }
  return detail::make_result<T>("rowwise_conv", {rows}, std::move(out), {&sigma, &w, &b},
                                [rows, k](Node<T>& self) {
                                  const T* s = self.inputs[0]->value.data();
                                  const T* wv = self.inputs[1]->value.data();
                                  T* gs = detail::input_grad(self, 0);
                                  T* gw = detail::input_grad(self, 1);
                                  T* gb = detail::input_grad(self, 2);
                                  for (std::size_t i = 0; i < rows; ++i) {
                                    const T g = self.grad[i];
                                    if (gb) gb[0] += g;
                                    for (std::size_t j = 0; j < k; ++j) {
                                      if (gs) gs[i * k + j] += g * wv[j];
                                      if (gw) gw[j] += g * s[i * k + j];
                                    }
                                  }
                                });
}

// Dense map on a vector: (K) -> (N) with weight (N, K) and bias (N).
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  detail::require_rank(weight.shape(), 2, "linear weight");
  const std::size_t n = weight.shape()[0];
  const auto y = matmul(weight, reshape(x, {x.numel(), 1}));
  return add(reshape(y, {n}), bias);
}

// (r^2 C, H, W) -> (C, rH, rW) with out[c, rh+i, rw+j] = x[c r^2 + i r + j, h, w].
template <class T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, std::size_t r) {
  detail::require_rank(x.shape(), 3, "pixel_shuffle");
  const std::size_t cin = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  if (r == 0 || cin % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: channel count " + std::to_string(cin) + " not divisible by r^2 = " +
                     std::to_string(r * r));
  }
  const std::size_t c = cin / (r * r);
  const std::size_t oh = h * r, ow = w * r;
  // index[o] = source offset of output element o.
  std::vector<std::size_t> index(cin * h * w);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const std::size_t src_c = ch * r * r + (y % r) * r + (xx % r);
        index[(ch * oh + y) * ow + xx] = (src_c * h + y / r) * w + xx / r;
      }
  const auto in = x.data();
  Buffer<T> out(in.size());
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = in[index[o]];
  return detail::make_result<T>("pixel_shuffle", {c, oh, ow}, std::move(out), {&x},
                                [index = std::move(index)](Node<T>& self) {
                                  T* gx = detail::input_grad(self, 0);
                                  for (std::size_t o = 0; o < index.size(); ++o) gx[index[o]] += self.grad[o];
                                });
}

// Inverse of pixel_shuffle: (C, rH, rW) -> (r^2 C, H, W).
template <class T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, std::size_t r) {
  detail::require_rank(x.shape(), 3, "pixel_unshuffle");
  const std::size_t c = x.shape()[0], oh = x.shape()[1], ow = x.shape()[2];
  if (r == 0 || oh % r != 0 || ow % r != 0) {
    throw ShapeError("pixel_unshuffle: spatial extents not divisible by " + std::to_string(r));
  }
  const std::size_t h = oh / r, w = ow / r;
  std::vector<std::size_t> index(x.numel());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const std::size_t dst_c = ch * r * r + (y % r) * r + (xx % r);
        index[(dst_c * h + y / r) * w + xx / r] = (ch * oh + y) * ow + xx;
      }
  const auto in = x.data();
  Buffer<T> out(in.size());
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = in[index[o]];
  return detail::make_result<T>("pixel_unshuffle", {c * r * r, h, w}, std::move(out), {&x},
                                [index = std::move(index)](Node<T>& self) {
                                  T* gx = detail::input_grad(self, 0);
                                  for (std::size_t o = 0; o < index.size(); ++o) gx[index[o]] += self.grad[o];
                                });
}

// Floor-mapped nearest neighbour: out[i, j] = x[floor(i h / out_h), floor(j w / out_w)].
template <class T>
Tensor<T> nearest_upsample(const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
  detail::require_rank(x.shape(), 3, "nearest_upsample");
  const std::size_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  if (out_h < h || out_w < w) {
    throw ShapeError("nearest_upsample: output must not be smaller than input " + to_string(x.shape()));
  }
  std::vector<std::size_t> index(c * out_h * out_w);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < out_h; ++i)
      for (std::size_t j = 0; j < out_w; ++j)
        index[(ch * out_h + i) * out_w + j] = (ch * h + i * h / out_h) * w + j * w / out_w;
  const auto in = x.data();
  Buffer<T> out(index.size());
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = in[index[o]];
  return detail::make_result<T>("nearest_upsample", {c, out_h, out_w}, std::move(out), {&x},
                                [index = std::move(index)](Node<T>& self) {
                                  T* gx = detail::input_grad(self, 0);
                                  for (std::size_t o = 0; o < index.size(); ++o) gx[index[o]] += self.grad[o];
                                });
}

}  // namespace rbam
