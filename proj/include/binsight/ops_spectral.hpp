#pragma once

#include <complex>
#include <vector>

#include "binsight/fft.hpp"
#include "binsight/ops.hpp"
#include "binsight/stft.hpp"

// STFT/ISTFT as differentiable graph nodes, plus the complex-plane
// helpers the spatial-sound head needs. Complex data in the graph is kept
// as two real planes: shape (N, 2, bins, frames) with plane 0 = re,
// plane 1 = im.

namespace binsight::nn {

namespace detail_spec {

template <typename T>
std::vector<T> window_as(const dsp::StftParams& p) {
  const auto wd = dsp::make_window(p.window, p.window_size);
  return std::vector<T>(wd.begin(), wd.end());
}

}  // namespace detail_spec

// x (N, L) -> (N, 2, bins, frames); frames = 1 + (L - win) / hop.
template <typename T>
Tensor<T> stft_op(const Tensor<T>& x, const dsp::StftParams& p) {
  dsp::validate(p);
  if (x.rank() != 2) throw ConfigError("stft_op: expected (N, L)");
  const int n = x.dim(0);
  const std::size_t len = static_cast<std::size_t>(x.dim(1));
  const std::size_t frames = dsp::frame_count(len, p);
  const int win = p.window_size, hop = p.hop_length;
  const std::size_t bins = static_cast<std::size_t>(win) / 2 + 1;
  const auto window = detail_spec::window_as<T>(p);

  const std::size_t plane = bins * frames;
  std::vector<T> out(static_cast<std::size_t>(n) * 2 * plane);
  std::vector<T> frame(win);
  for (int s = 0; s < n; ++s) {
    const T* src = x.ptr() + s * len;
    T* out_re = out.data() + static_cast<std::size_t>(s) * 2 * plane;
    T* out_im = out_re + plane;
    for (std::size_t t = 0; t < frames; ++t) {
      for (int i = 0; i < win; ++i)
        frame[i] = window[i] * src[t * hop + i];
      const auto spec = dsp::rfft<T>(frame);
      for (std::size_t k = 0; k < bins; ++k) {
        out_re[k * frames + t] = spec[k].real();
        out_im[k * frames + t] = spec[k].imag();
      }
    }
  }
  return make_op<T>(
      Shape{n, 2, static_cast<int>(bins), static_cast<int>(frames)},
      std::move(out), {x},
      [n, len, frames, win, hop, bins, window, plane](detail::Node<T>& nd) {
        T* gx = grad_dst(*nd.parents[0]);
        if (!gx) return;
        std::vector<std::complex<T>> y(bins);
        for (int s = 0; s < n; ++s) {
          const T* g_re = nd.grad.data() + static_cast<std::size_t>(s) * 2 * plane;
          const T* g_im = g_re + plane;
          for (std::size_t t = 0; t < frames; ++t) {
            // Adjoint of the per-frame rfft: interior bins carry weight 1,
            // which irfft reproduces once they are halved and the result
            // is scaled by the window size.
            for (std::size_t k = 0; k < bins; ++k) {
              const T re = g_re[k * frames + t];
              const T im = g_im[k * frames + t];
              const T half = (k == 0 || k == bins - 1) ? T(1) : T(0.5);
              y[k] = {re * half, im * half};
            }
            const auto v = dsp::irfft<T>(y, static_cast<std::size_t>(win));
            T* dst = gx + s * len + t * hop;
            for (int i = 0; i < win; ++i)
              dst[i] += window[i] * static_cast<T>(win) * v[i];
          }
        }
      });
}

// s (N, 2, bins, frames) -> (N, win + (frames-1)*hop) by weighted
// overlap-add with squared-window compensation.
template <typename T>
Tensor<T> istft_op(const Tensor<T>& s, const dsp::StftParams& p) {
  dsp::validate(p);
  if (s.rank() != 4 || s.dim(1) != 2)
    throw ConfigError("istft_op: expected (N, 2, bins, frames)");
  const int n = s.dim(0);
  const std::size_t bins = static_cast<std::size_t>(s.dim(2));
  const std::size_t frames = static_cast<std::size_t>(s.dim(3));
  const int win = p.window_size, hop = p.hop_length;
  if (bins != static_cast<std::size_t>(win) / 2 + 1)
    throw ConfigError("istft_op: bin count does not match window");
  const std::size_t len = win + (frames - 1) * hop;
  const auto window = detail_spec::window_as<T>(p);

  std::vector<T> wsum(len, T(0));
  for (std::size_t t = 0; t < frames; ++t)
    for (int i = 0; i < win; ++i)
      wsum[t * hop + i] += window[i] * window[i];
  const T tiny = static_cast<T>(1e-12);
  for (std::size_t i = 1; i + 1 < len; ++i) {
    if (wsum[i] <= tiny)
      throw ConfigError("istft_op: window/hop overlap-add sum has zeros");
  }
  std::vector<T> inv_wsum(len);
  for (std::size_t i = 0; i < len; ++i)
    inv_wsum[i] = wsum[i] > tiny ? T(1) / wsum[i] : T(0);

  const std::size_t plane = bins * frames;
  std::vector<T> out(static_cast<std::size_t>(n) * len, T(0));
  std::vector<std::complex<T>> col(bins);
  for (int smp = 0; smp < n; ++smp) {
    const T* s_re = s.ptr() + static_cast<std::size_t>(smp) * 2 * plane;
    const T* s_im = s_re + plane;
    T* dst = out.data() + static_cast<std::size_t>(smp) * len;
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t k = 0; k < bins; ++k)
        col[k] = {s_re[k * frames + t], s_im[k * frames + t]};
      const auto frame = dsp::irfft<T>(col, static_cast<std::size_t>(win));
      for (int i = 0; i < win; ++i)
        dst[t * hop + i] += window[i] * frame[i];
    }
    for (std::size_t i = 0; i < len; ++i) dst[i] *= inv_wsum[i];
  }
  return make_op<T>(
      Shape{n, static_cast<int>(len)}, std::move(out), {s},
      [n, bins, frames, win, hop, len, window, inv_wsum,
       plane](detail::Node<T>& nd) {
        T* gs = grad_dst(*nd.parents[0]);
        if (!gs) return;
        std::vector<T> v(win);
        for (int smp = 0; smp < n; ++smp) {
          const T* g = nd.grad.data() + static_cast<std::size_t>(smp) * len;
          T* g_re = gs + static_cast<std::size_t>(smp) * 2 * plane;
          T* g_im = g_re + plane;
          for (std::size_t t = 0; t < frames; ++t) {
            for (int i = 0; i < win; ++i)
              v[i] = window[i] * g[t * hop + i] * inv_wsum[t * hop + i];
            const auto spec = dsp::rfft<T>(v);
            // Adjoint of irfft: (c_k / win) * rfft(v), c = 1 at the edge
            // bins and 2 inside; edge-bin imaginary parts are fixed zeros.
            for (std::size_t k = 0; k < bins; ++k) {
              const bool edge = (k == 0 || k == bins - 1);
              const T ck = edge ? T(1) : T(2);
              g_re[k * frames + t] += ck / static_cast<T>(win) * spec[k].real();
              if (!edge)
                g_im[k * frames + t] += ck / static_cast<T>(win) * spec[k].imag();
            }
          }
        }
      });
}

// Complex product of two plane tensors (N, 2, F, Tt).
template <typename T>
Tensor<T> cmul_planar(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "cmul_planar");
  if (a.rank() != 4 || a.dim(1) != 2)
    throw ConfigError("cmul_planar: expected (N, 2, F, T)");
  const int n = a.dim(0);
  const std::size_t plane = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
  std::vector<T> out(a.size());
  for (int s = 0; s < n; ++s) {
    const std::size_t off = static_cast<std::size_t>(s) * 2 * plane;
    const T* ar = a.ptr() + off;
    const T* ai = ar + plane;
    const T* br = b.ptr() + off;
    const T* bi = br + plane;
    T* or_ = out.data() + off;
    T* oi = or_ + plane;
    for (std::size_t i = 0; i < plane; ++i) {
      or_[i] = ar[i] * br[i] - ai[i] * bi[i];
      oi[i] = ar[i] * bi[i] + ai[i] * br[i];
    }
  }
  return make_op<T>(
      a.shape(), std::move(out), {a, b}, [n, plane](detail::Node<T>& nd) {
        const T* av = nd.parents[0]->value.data();
        const T* bv = nd.parents[1]->value.data();
        T* ga = grad_dst(*nd.parents[0]);
        T* gb = grad_dst(*nd.parents[1]);
        for (int s = 0; s < n; ++s) {
          const std::size_t off = static_cast<std::size_t>(s) * 2 * plane;
          const T* gr = nd.grad.data() + off;
          const T* gi = gr + plane;
          // d(a*b)/da = b (complex), so grad_a = g * conj(b).
          if (ga) {
            const T* br = bv + off;
            const T* bi = br + plane;
            for (std::size_t i = 0; i < plane; ++i) {
              ga[off + i] += gr[i] * br[i] + gi[i] * bi[i];
              ga[off + plane + i] += -gr[i] * bi[i] + gi[i] * br[i];
            }
          }
          if (gb) {
            const T* ar = av + off;
            const T* ai = ar + plane;
            for (std::size_t i = 0; i < plane; ++i) {
              gb[off + i] += gr[i] * ar[i] + gi[i] * ai[i];
              gb[off + plane + i] += -gr[i] * ai[i] + gi[i] * ar[i];
            }
          }
        }
      });
}

// (N, 2, F, Tt) -> (N, F, Tt): sqrt(re^2 + im^2 + eps), smooth at zero.
template <typename T>
Tensor<T> complex_magnitude(const Tensor<T>& a, T eps = T(1e-12)) {
  if (a.rank() != 4 || a.dim(1) != 2)
    throw ConfigError("complex_magnitude: expected (N, 2, F, T)");
  const int n = a.dim(0);
  const std::size_t plane = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
  std::vector<T> out(static_cast<std::size_t>(n) * plane);
  for (int s = 0; s < n; ++s) {
    const T* re = a.ptr() + static_cast<std::size_t>(s) * 2 * plane;
    const T* im = re + plane;
    T* dst = out.data() + static_cast<std::size_t>(s) * plane;
    for (std::size_t i = 0; i < plane; ++i)
      dst[i] = std::sqrt(re[i] * re[i] + im[i] * im[i] + eps);
  }
  return make_op<T>(
      Shape{n, a.dim(2), a.dim(3)}, std::move(out), {a},
      [n, plane](detail::Node<T>& nd) {
        T* ga = grad_dst(*nd.parents[0]);
        if (!ga) return;
        const T* av = nd.parents[0]->value.data();
        for (int s = 0; s < n; ++s) {
          const T* re = av + static_cast<std::size_t>(s) * 2 * plane;
          const T* im = re + plane;
          const T* g = nd.grad.data() + static_cast<std::size_t>(s) * plane;
          const T* y = nd.value.data() + static_cast<std::size_t>(s) * plane;
          T* gre = ga + static_cast<std::size_t>(s) * 2 * plane;
          T* gim = gre + plane;
          for (std::size_t i = 0; i < plane; ++i) {
            const T inv = g[i] / y[i];
            gre[i] += inv * re[i];
            gim[i] += inv * im[i];
          }
        }
      });
}

// Mean over pixels of -log p(target); probs (N, C, H, W) already softmaxed,
// labels row-major (N, H, W) with values in [0, C).
template <typename T>
Tensor<T> cross_entropy_mean(const Tensor<T>& probs,
                             const std::vector<int>& labels,
                             T clamp = T(1e-12)) {
  if (probs.rank() != 4) throw ConfigError("cross_entropy: expected (N,C,H,W)");
  const int n = probs.dim(0), c = probs.dim(1), h = probs.dim(2),
            w = probs.dim(3);
  const std::size_t pixels = static_cast<std::size_t>(n) * h * w;
  if (labels.size() != pixels)
    throw InvalidInput("cross_entropy: label count mismatch");
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t sample = static_cast<std::size_t>(c) * plane;
  T acc = T(0);
  for (std::size_t i = 0; i < pixels; ++i) {
    const int lab = labels[i];
    if (lab < 0 || lab >= c)
      throw InvalidInput("cross_entropy: label out of vocabulary: " +
                         std::to_string(lab));
    const std::size_t s = i / plane, px = i % plane;
    const T p = probs.ptr()[s * sample + static_cast<std::size_t>(lab) * plane + px];
    acc -= std::log(std::max(p, clamp));
  }
  const T inv = T(1) / static_cast<T>(pixels);
  return make_op<T>(
      Shape{}, {acc * inv}, {probs},
      [labels, plane, sample, inv, clamp](detail::Node<T>& nd) {
        T* g = grad_dst(*nd.parents[0]);
        if (!g) return;
        const T go = nd.grad[0] * inv;
        const T* pv = nd.parents[0]->value.data();
        for (std::size_t i = 0; i < labels.size(); ++i) {
          const std::size_t s = i / plane, px = i % plane;
          const std::size_t idx =
              s * sample + static_cast<std::size_t>(labels[i]) * plane + px;
          g[idx] -= go / std::max(pv[idx], clamp);
        }
      });
}

}  // namespace binsight::nn
