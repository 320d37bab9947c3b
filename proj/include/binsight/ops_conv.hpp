#pragma once

#include <cmath>
#include <vector>

#include "binsight/ops.hpp"

// Spatial ops on NCHW tensors: strided/dilated convolution, its transpose,
// batch normalization and bilinear resampling. Convolutions use the
// cross-correlation convention and run as im2col + GEMM; the backward
// passes rebuild the column buffer instead of caching it.

namespace binsight::nn {

struct Conv2dGeom {
  int kh = 1, kw = 1;
  int sh = 1, sw = 1;
  int ph = 0, pw = 0;
  int dh = 1, dw = 1;

  int out_dim(int in, bool height) const {
    const int k = height ? kh : kw, s = height ? sh : sw,
              p = height ? ph : pw, d = height ? dh : dw;
    return (in + 2 * p - d * (k - 1) - 1) / s + 1;
  }
  int tr_out_dim(int in, bool height) const {
    const int k = height ? kh : kw, s = height ? sh : sw,
              p = height ? ph : pw, d = height ? dh : dw;
    return (in - 1) * s - 2 * p + d * (k - 1) + 1;
  }
};

namespace detail_conv {

// col[(c,ki,kj), p] = src[c, i*sh - ph + ki*dh, j*sw - pw + kj*dw] for the
// position grid p = (i, j) in (ph_count x pw_count); zeros off the edge.
template <typename T>
void im2col(const T* src, int channels, int src_h, int src_w,
            const Conv2dGeom& g, int ph_count, int pw_count, T* col) {
  const std::size_t positions =
      static_cast<std::size_t>(ph_count) * pw_count;
  std::size_t row = 0;
  for (int c = 0; c < channels; ++c) {
    const T* plane = src + static_cast<std::size_t>(c) * src_h * src_w;
    for (int ki = 0; ki < g.kh; ++ki) {
      for (int kj = 0; kj < g.kw; ++kj, ++row) {
        T* dst = col + row * positions;
        std::size_t p = 0;
        for (int i = 0; i < ph_count; ++i) {
          const int si = i * g.sh - g.ph + ki * g.dh;
          if (si < 0 || si >= src_h) {
            for (int j = 0; j < pw_count; ++j) dst[p++] = T(0);
            continue;
          }
          const T* srow = plane + static_cast<std::size_t>(si) * src_w;
          for (int j = 0; j < pw_count; ++j) {
            const int sj = j * g.sw - g.pw + kj * g.dw;
            dst[p++] = (sj < 0 || sj >= src_w) ? T(0) : srow[sj];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add the column buffer back onto the grid.
template <typename T>
void col2im_accum(const T* col, int channels, int dst_h, int dst_w,
                  const Conv2dGeom& g, int ph_count, int pw_count, T* dst) {
  const std::size_t positions =
      static_cast<std::size_t>(ph_count) * pw_count;
  std::size_t row = 0;
  for (int c = 0; c < channels; ++c) {
    T* plane = dst + static_cast<std::size_t>(c) * dst_h * dst_w;
    for (int ki = 0; ki < g.kh; ++ki) {
      for (int kj = 0; kj < g.kw; ++kj, ++row) {
        const T* src = col + row * positions;
        std::size_t p = 0;
        for (int i = 0; i < ph_count; ++i) {
          const int di = i * g.sh - g.ph + ki * g.dh;
          if (di < 0 || di >= dst_h) {
            p += pw_count;
            continue;
          }
          T* drow = plane + static_cast<std::size_t>(di) * dst_w;
          for (int j = 0; j < pw_count; ++j, ++p) {
            const int dj = j * g.sw - g.pw + kj * g.dw;
            if (dj >= 0 && dj < dst_w) drow[dj] += src[p];
          }
        }
      }
    }
  }
}

// C (m x n) += A (m x k) * B^T where B is (n x k): rows of both contiguous.
template <typename T>
void gemm_nt_accum(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j)
      crow[j] += kern::dot(arow, b + static_cast<std::size_t>(j) * k,
                           static_cast<std::size_t>(k));
  }
}

// C (m x n) += A^T * B where A is (k x m), B is (k x n).
template <typename T>
void gemm_tn_accum(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int p = 0; p < k; ++p) {
    const T* arow = a + static_cast<std::size_t>(p) * m;
    const T* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      if (arow[i] != T(0))
        kern::axpy(arow[i], brow, c + static_cast<std::size_t>(i) * n,
                   static_cast<std::size_t>(n));
    }
  }
}

}  // namespace detail_conv

// x (N,Cin,H,W), w (Cout,Cin,kh,kw), bias (Cout) -> (N,Cout,Ho,Wo)
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 const Conv2dGeom& g) {
  if (x.rank() != 4 || w.rank() != 4)
    throw ConfigError("conv2d: expected 4-d input and weight");
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0);
  if (w.dim(1) != cin)
    throw ConfigError("conv2d: weight expects " + std::to_string(w.dim(1)) +
                      " input channels, got " + std::to_string(cin));
  if (w.dim(2) != g.kh || w.dim(3) != g.kw)
    throw ConfigError("conv2d: kernel size mismatch");
  if (b.size() != static_cast<std::size_t>(cout))
    throw ConfigError("conv2d: bias size mismatch");
  const int ho = g.out_dim(h, true), wo = g.out_dim(wd, false);
  if (ho <= 0 || wo <= 0)
    throw ConfigError("conv2d: no valid output positions for input " +
                      shape_str(x.shape()));

  const int krows = cin * g.kh * g.kw;
  const std::size_t positions = static_cast<std::size_t>(ho) * wo;
  const std::size_t in_plane = static_cast<std::size_t>(cin) * h * wd;
  const std::size_t out_plane = static_cast<std::size_t>(cout) * positions;

  std::vector<T> out(static_cast<std::size_t>(n) * out_plane);
  std::vector<T> col(static_cast<std::size_t>(krows) * positions);
  for (int s = 0; s < n; ++s) {
    detail_conv::im2col(x.ptr() + s * in_plane, cin, h, wd, g, ho, wo,
                        col.data());
    T* dst = out.data() + s * out_plane;
    kern::gemm(cout, static_cast<int>(positions), krows, w.ptr(), krows,
               col.data(), static_cast<int>(positions), dst,
               static_cast<int>(positions), false);
    for (int c = 0; c < cout; ++c) {
      const T bias = b.ptr()[c];
      T* row = dst + static_cast<std::size_t>(c) * positions;
      for (std::size_t p = 0; p < positions; ++p) row[p] += bias;
    }
  }

  return make_op<T>(
      Shape{n, cout, ho, wo}, std::move(out), {x, w, b},
      [n, cin, h, wd, cout, g, krows, positions, in_plane,
       out_plane, ho, wo](detail::Node<T>& nd) {
        const T* xv = nd.parents[0]->value.data();
        const T* wv = nd.parents[1]->value.data();
        T* gx = grad_dst(*nd.parents[0]);
        T* gw = grad_dst(*nd.parents[1]);
        T* gb = grad_dst(*nd.parents[2]);
        std::vector<T> col(static_cast<std::size_t>(krows) * positions);
        std::vector<T> gcol;
        if (gx) gcol.resize(col.size());
        for (int s = 0; s < n; ++s) {
          const T* gout = nd.grad.data() + s * out_plane;
          if (gw) {
            detail_conv::im2col(xv + s * in_plane, cin, h, wd, g, ho, wo,
                                col.data());
            // gW (cout x krows) += gout (cout x P) * col^T (P x krows)
            detail_conv::gemm_nt_accum(cout, krows,
                                       static_cast<int>(positions), gout,
                                       col.data(), gw);
          }
          if (gx) {
            // gcol (krows x P) = W^T (krows x cout) * gout (cout x P)
            std::fill(gcol.begin(), gcol.end(), T(0));
            detail_conv::gemm_tn_accum(krows, static_cast<int>(positions),
                                       cout, wv, gout, gcol.data());
            detail_conv::col2im_accum(gcol.data(), cin, h, wd, g, ho, wo,
                                      gx + s * in_plane);
          }
          if (gb) {
            for (int c = 0; c < cout; ++c)
              gb[c] += kern::sum(gout + static_cast<std::size_t>(c) * positions,
                                 positions);
          }
        }
      });
}

// x (N,Cin,H,W), w (Cin,Cout,kh,kw), bias (Cout) -> (N,Cout,Ho,Wo) with
// Ho = (H-1)*sh - 2*ph + dh*(kh-1) + 1.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& w,
                           const Tensor<T>& b, const Conv2dGeom& g) {
  if (x.rank() != 4 || w.rank() != 4)
    throw ConfigError("conv_transpose2d: expected 4-d input and weight");
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  if (w.dim(0) != cin)
    throw ConfigError("conv_transpose2d: weight expects " +
                      std::to_string(w.dim(0)) + " input channels");
  const int cout = w.dim(1);
  if (w.dim(2) != g.kh || w.dim(3) != g.kw)
    throw ConfigError("conv_transpose2d: kernel size mismatch");
  if (b.size() != static_cast<std::size_t>(cout))
    throw ConfigError("conv_transpose2d: bias size mismatch");
  const int ho = g.tr_out_dim(h, true), wo = g.tr_out_dim(wd, false);
  if (ho <= 0 || wo <= 0)
    throw ConfigError("conv_transpose2d: degenerate output size");

  const int krows = cout * g.kh * g.kw;           // column rows
  const std::size_t positions = static_cast<std::size_t>(h) * wd;
  const std::size_t in_plane = static_cast<std::size_t>(cin) * positions;
  const std::size_t out_plane = static_cast<std::size_t>(cout) * ho * wo;

  std::vector<T> out(static_cast<std::size_t>(n) * out_plane, T(0));
  std::vector<T> col(static_cast<std::size_t>(krows) * positions);
  for (int s = 0; s < n; ++s) {
    // col (krows x P) = Wv^T (krows x cin) * x (cin x P)
    std::fill(col.begin(), col.end(), T(0));
    detail_conv::gemm_tn_accum(krows, static_cast<int>(positions), cin,
                               w.ptr(), x.ptr() + s * in_plane, col.data());
    T* dst = out.data() + s * out_plane;
    detail_conv::col2im_accum(col.data(), cout, ho, wo, g, h, wd, dst);
    for (int c = 0; c < cout; ++c) {
      const T bias = b.ptr()[c];
      T* plane = dst + static_cast<std::size_t>(c) * ho * wo;
      for (int p = 0; p < ho * wo; ++p) plane[p] += bias;
    }
  }

  return make_op<T>(
      Shape{n, cout, ho, wo}, std::move(out), {x, w, b},
      [n, cin, h, wd, cout, g, krows, positions, in_plane, out_plane, ho,
       wo](detail::Node<T>& nd) {
        const T* xv = nd.parents[0]->value.data();
        const T* wv = nd.parents[1]->value.data();
        T* gx = grad_dst(*nd.parents[0]);
        T* gw = grad_dst(*nd.parents[1]);
        T* gb = grad_dst(*nd.parents[2]);
        std::vector<T> gcol(static_cast<std::size_t>(krows) * positions);
        for (int s = 0; s < n; ++s) {
          const T* gout = nd.grad.data() + s * out_plane;
          // gcol[(co,ki,kj), p] gathers gout at the scatter targets.
          detail_conv::im2col(gout, cout, ho, wo, g, h, wd, gcol.data());
          if (gx) {
            // gx (cin x P) += Wv (cin x krows) * gcol (krows x P)
            kern::gemm(cin, static_cast<int>(positions), krows, wv, krows,
                       gcol.data(), static_cast<int>(positions),
                       gx + s * in_plane, static_cast<int>(positions), true);
          }
          if (gw) {
            // gWv (cin x krows) += x (cin x P) * gcol^T (P x krows)
            detail_conv::gemm_nt_accum(cin, krows,
                                       static_cast<int>(positions),
                                       xv + s * in_plane, gcol.data(), gw);
          }
          if (gb) {
            for (int c = 0; c < cout; ++c)
              gb[c] += kern::sum(
                  gout + static_cast<std::size_t>(c) * ho * wo,
                  static_cast<std::size_t>(ho) * wo);
          }
        }
      });
}

// Per-channel batch normalization over (N,H,W). Running statistics are
// plain buffers owned by the layer; they are read in inference mode and
// updated (not differentiated) in training mode.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, std::vector<T>& running_mean,
                     std::vector<T>& running_var, bool training,
                     T momentum = T(0.9), T eps = T(1e-5)) {
  if (x.rank() != 4) throw ConfigError("batch_norm: expected NCHW");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (n <= 0) throw InvalidInput("batch_norm: empty batch");
  if (gamma.size() != static_cast<std::size_t>(c) ||
      beta.size() != static_cast<std::size_t>(c) ||
      running_mean.size() != static_cast<std::size_t>(c) ||
      running_var.size() != static_cast<std::size_t>(c))
    throw ConfigError("batch_norm: channel dimension mismatch");

  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t sample = static_cast<std::size_t>(c) * plane;
  const std::size_t m = static_cast<std::size_t>(n) * plane;

  std::vector<T> mean(c), invstd(c);
  if (training) {
    for (int ch = 0; ch < c; ++ch) {
      T acc = T(0);
      for (int s = 0; s < n; ++s)
        acc += kern::sum(x.ptr() + s * sample + ch * plane, plane);
      const T mu = acc / static_cast<T>(m);
      T var = T(0);
      for (int s = 0; s < n; ++s) {
        const T* p = x.ptr() + s * sample + ch * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const T d = p[i] - mu;
          var += d * d;
        }
      }
      var /= static_cast<T>(m);
      mean[ch] = mu;
      invstd[ch] = T(1) / std::sqrt(var + eps);
      running_mean[ch] = momentum * running_mean[ch] + (T(1) - momentum) * mu;
      running_var[ch] = momentum * running_var[ch] + (T(1) - momentum) * var;
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean[ch] = running_mean[ch];
      invstd[ch] = T(1) / std::sqrt(running_var[ch] + eps);
    }
  }

  std::vector<T> out(x.size());
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      const T* src = x.ptr() + s * sample + ch * plane;
      T* dst = out.data() + s * sample + ch * plane;
      const T a = gamma.ptr()[ch] * invstd[ch];
      const T b2 = beta.ptr()[ch] - a * mean[ch];
      for (std::size_t i = 0; i < plane; ++i) dst[i] = a * src[i] + b2;
    }
  }

  return make_op<T>(
      x.shape(), std::move(out), {x, gamma, beta},
      [n, c, plane, sample, m, mean, invstd, training](detail::Node<T>& nd) {
        const T* xv = nd.parents[0]->value.data();
        const T* gamma_v = nd.parents[1]->value.data();
        T* gx = grad_dst(*nd.parents[0]);
        T* gg = grad_dst(*nd.parents[1]);
        T* gb = grad_dst(*nd.parents[2]);
        for (int ch = 0; ch < c; ++ch) {
          T sum_g = T(0), sum_gx = T(0);
          for (int s = 0; s < n; ++s) {
            const T* g = nd.grad.data() + s * sample + ch * plane;
            const T* xp = xv + s * sample + ch * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_g += g[i];
              sum_gx += g[i] * (xp[i] - mean[ch]) * invstd[ch];
            }
          }
          if (gb) gb[ch] += sum_g;
          if (gg) gg[ch] += sum_gx;
          if (gx) {
            const T a = gamma_v[ch] * invstd[ch];
            for (int s = 0; s < n; ++s) {
              const T* g = nd.grad.data() + s * sample + ch * plane;
              const T* xp = xv + s * sample + ch * plane;
              T* dst = gx + s * sample + ch * plane;
              if (training) {
                const T im = T(1) / static_cast<T>(m);
                for (std::size_t i = 0; i < plane; ++i) {
                  const T xhat = (xp[i] - mean[ch]) * invstd[ch];
                  dst[i] += a * (g[i] - im * (sum_g + xhat * sum_gx));
                }
              } else {
                for (std::size_t i = 0; i < plane; ++i) dst[i] += a * g[i];
              }
            }
          }
        }
      });
}

// Bilinear resize of NCHW maps to an arbitrary target grid (up or down),
// half-pixel centers, edges clamped.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, int out_h, int out_w) {
  if (x.rank() != 4) throw ConfigError("bilinear_resize: expected NCHW");
  if (out_h <= 0 || out_w <= 0) throw ConfigError("bilinear_resize: bad target");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);

  struct Tap {
    int lo, hi;
    T w_lo, w_hi;
  };
  auto make_taps = [](int in, int out) {
    std::vector<Tap> taps(out);
    const double scale = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
      double src = (i + 0.5) * scale - 0.5;
      if (src < 0) src = 0;
      if (src > in - 1) src = in - 1;
      const int lo = static_cast<int>(src);
      const int hi = std::min(lo + 1, in - 1);
      const T f = static_cast<T>(src - lo);
      taps[i] = {lo, hi, T(1) - f, f};
    }
    return taps;
  };
  const auto ty = make_taps(h, out_h);
  const auto tx = make_taps(w, out_w);

  const std::size_t in_plane = static_cast<std::size_t>(h) * w;
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  std::vector<T> out(static_cast<std::size_t>(n) * c * out_plane);
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      const T* src = x.ptr() + (static_cast<std::size_t>(s) * c + ch) * in_plane;
      T* dst = out.data() + (static_cast<std::size_t>(s) * c + ch) * out_plane;
      for (int i = 0; i < out_h; ++i) {
        const Tap& a = ty[i];
        for (int j = 0; j < out_w; ++j) {
          const Tap& b = tx[j];
          dst[static_cast<std::size_t>(i) * out_w + j] =
              a.w_lo * (b.w_lo * src[static_cast<std::size_t>(a.lo) * w + b.lo] +
                        b.w_hi * src[static_cast<std::size_t>(a.lo) * w + b.hi]) +
              a.w_hi * (b.w_lo * src[static_cast<std::size_t>(a.hi) * w + b.lo] +
                        b.w_hi * src[static_cast<std::size_t>(a.hi) * w + b.hi]);
        }
      }
    }
  }
  return make_op<T>(
      Shape{n, c, out_h, out_w}, std::move(out), {x},
      [n, c, h, w, out_h, out_w, ty, tx, in_plane, out_plane](detail::Node<T>& nd) {
        T* gx = grad_dst(*nd.parents[0]);
        if (!gx) return;
        for (int s = 0; s < n; ++s) {
          for (int ch = 0; ch < c; ++ch) {
            const T* g = nd.grad.data() +
                         (static_cast<std::size_t>(s) * c + ch) * out_plane;
            T* dst = gx + (static_cast<std::size_t>(s) * c + ch) * in_plane;
            for (int i = 0; i < out_h; ++i) {
              const auto& a = ty[i];
              for (int j = 0; j < out_w; ++j) {
                const auto& b = tx[j];
                const T gv = g[static_cast<std::size_t>(i) * out_w + j];
                dst[static_cast<std::size_t>(a.lo) * w + b.lo] += a.w_lo * b.w_lo * gv;
                dst[static_cast<std::size_t>(a.lo) * w + b.hi] += a.w_lo * b.w_hi * gv;
                dst[static_cast<std::size_t>(a.hi) * w + b.lo] += a.w_hi * b.w_lo * gv;
                dst[static_cast<std::size_t>(a.hi) * w + b.hi] += a.w_hi * b.w_hi * gv;
              }
            }
          }
        }
      });
}

// Center crop of the spatial dims of an NCHW tensor.
template <typename T>
Tensor<T> center_crop(const Tensor<T>& x, int out_h, int out_w) {
  if (x.rank() != 4) throw ConfigError("center_crop: expected NCHW");
  const int h = x.dim(2), w = x.dim(3);
  if (out_h > h || out_w > w)
    throw ConfigError("center_crop: target larger than input");
  const int top = (h - out_h) / 2, left = (w - out_w) / 2;
  auto rows = slice(x, 2, top, out_h);
  return slice(rows, 3, left, out_w);
}

}  // namespace binsight::nn
