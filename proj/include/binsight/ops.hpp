#pragma once

#include <cmath>
#include <vector>

#include "binsight/kern.hpp"
#include "binsight/tensor.hpp"

// Differentiable operations. Each op computes its value eagerly and
// registers a closure that accumulates into the parents' grad buffers.
// Convention for all backward closures: skip parents that do not require
// gradients (grad_dst returns nullptr for them).

namespace binsight::nn {

template <typename T>
T* grad_dst(detail::Node<T>& parent) {
  if (!parent.requires_grad) return nullptr;
  parent.ensure_grad();
  return parent.grad.data();
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                      const char* what) {
  if (a.shape() != b.shape())
    throw ConfigError(std::string(what) + ": shape mismatch " +
                      shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// ---------------------------------------------------------------- basics

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  std::vector<T> out(a.size());
  kern::add(a.ptr(), b.ptr(), out.data(), out.size());
  return make_op<T>(a.shape(), std::move(out), {a, b},
                    [](detail::Node<T>& n) {
                      for (int p = 0; p < 2; ++p) {
                        if (T* g = grad_dst(*n.parents[p]))
                          kern::axpy(T(1), n.grad.data(), g, n.grad.size());
                      }
                    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "sub");
  std::vector<T> out(a.size());
  kern::sub(a.ptr(), b.ptr(), out.data(), out.size());
  return make_op<T>(a.shape(), std::move(out), {a, b},
                    [](detail::Node<T>& n) {
                      if (T* g = grad_dst(*n.parents[0]))
                        kern::axpy(T(1), n.grad.data(), g, n.grad.size());
                      if (T* g = grad_dst(*n.parents[1]))
                        kern::axpy(T(-1), n.grad.data(), g, n.grad.size());
                    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "mul");
  std::vector<T> out(a.size());
  kern::mul(a.ptr(), b.ptr(), out.data(), out.size());
  return make_op<T>(a.shape(), std::move(out), {a, b},
                    [](detail::Node<T>& n) {
                      const auto& av = n.parents[0]->value;
                      const auto& bv = n.parents[1]->value;
                      if (T* g = grad_dst(*n.parents[0])) {
                        for (std::size_t i = 0; i < n.grad.size(); ++i)
                          g[i] += n.grad[i] * bv[i];
                      }
                      if (T* g = grad_dst(*n.parents[1])) {
                        for (std::size_t i = 0; i < n.grad.size(); ++i)
                          g[i] += n.grad[i] * av[i];
                      }
                    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> out(a.size());
  kern::scale(c, a.ptr(), out.data(), out.size());
  return make_op<T>(a.shape(), std::move(out), {a},
                    [c](detail::Node<T>& n) {
                      if (T* g = grad_dst(*n.parents[0]))
                        kern::axpy(c, n.grad.data(), g, n.grad.size());
                    });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  std::vector<T> out(a.data());
  for (auto& v : out) v += c;
  return make_op<T>(a.shape(), std::move(out), {a},
                    [](detail::Node<T>& n) {
                      if (T* g = grad_dst(*n.parents[0]))
                        kern::axpy(T(1), n.grad.data(), g, n.grad.size());
                    });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  kern::relu(a.ptr(), out.data(), out.size());
  return make_op<T>(a.shape(), std::move(out), {a},
                    [](detail::Node<T>& n) {
                      if (T* g = grad_dst(*n.parents[0]))
                        kern::relu_backward_accum(n.parents[0]->value.data(),
                                                  n.grad.data(), g,
                                                  n.grad.size());
                    });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  const T* x = a.ptr();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = T(1) / (T(1) + std::exp(-x[i]));
  return make_op<T>(a.shape(), std::move(out), {a},
                    [](detail::Node<T>& n) {
                      if (T* g = grad_dst(*n.parents[0])) {
                        for (std::size_t i = 0; i < n.grad.size(); ++i) {
                          const T y = n.value[i];
                          g[i] += n.grad[i] * y * (T(1) - y);
                        }
                      }
                    });
}

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  const T* x = a.ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
  return make_op<T>(a.shape(), std::move(out), {a},
                    [](detail::Node<T>& n) {
                      if (T* g = grad_dst(*n.parents[0])) {
                        for (std::size_t i = 0; i < n.grad.size(); ++i)
                          g[i] += n.grad[i] * (T(1) - n.value[i] * n.value[i]);
                      }
                    });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  const T s = kern::sum(a.ptr(), a.size());
  return make_op<T>(Shape{}, {s}, {a},
                    [](detail::Node<T>& n) {
                      if (T* g = grad_dst(*n.parents[0])) {
                        const T go = n.grad[0];
                        for (std::size_t i = 0; i < n.parents[0]->value.size();
                             ++i)
                          g[i] += go;
                      }
                    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  const T inv = T(1) / static_cast<T>(a.size());
  const T s = kern::sum(a.ptr(), a.size()) * inv;
  return make_op<T>(Shape{}, {s}, {a},
                    [inv](detail::Node<T>& n) {
                      if (T* g = grad_dst(*n.parents[0])) {
                        const T go = n.grad[0] * inv;
                        for (std::size_t i = 0; i < n.parents[0]->value.size();
                             ++i)
                          g[i] += go;
                      }
                    });
}

// mean((a-b)^2); the workhorse regression loss.
template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "mse");
  const std::size_t n = a.size();
  const T* av = a.ptr();
  const T* bv = b.ptr();
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T d = av[i] - bv[i];
    acc += d * d;
  }
  const T inv = T(1) / static_cast<T>(n);
  return make_op<T>(
      Shape{}, {acc * inv}, {a, b}, [inv](detail::Node<T>& nd) {
        const auto& av2 = nd.parents[0]->value;
        const auto& bv2 = nd.parents[1]->value;
        const T go = nd.grad[0] * T(2) * inv;
        if (T* g = grad_dst(*nd.parents[0])) {
          for (std::size_t i = 0; i < av2.size(); ++i)
            g[i] += go * (av2[i] - bv2[i]);
        }
        if (T* g = grad_dst(*nd.parents[1])) {
          for (std::size_t i = 0; i < av2.size(); ++i)
            g[i] -= go * (av2[i] - bv2[i]);
        }
      });
}

// mean(|a-b|); subgradient 0 at ties.
template <typename T>
Tensor<T> l1_mean(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "l1_mean");
  const std::size_t n = a.size();
  const T* av = a.ptr();
  const T* bv = b.ptr();
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(av[i] - bv[i]);
  const T inv = T(1) / static_cast<T>(n);
  return make_op<T>(
      Shape{}, {acc * inv}, {a, b}, [inv](detail::Node<T>& nd) {
        const auto& av2 = nd.parents[0]->value;
        const auto& bv2 = nd.parents[1]->value;
        const T go = nd.grad[0] * inv;
        T* ga = grad_dst(*nd.parents[0]);
        T* gb = grad_dst(*nd.parents[1]);
        for (std::size_t i = 0; i < av2.size(); ++i) {
          const T d = av2[i] - bv2[i];
          const T s = d > T(0) ? go : (d < T(0) ? -go : T(0));
          if (ga) ga[i] += s;
          if (gb) gb[i] -= s;
        }
      });
}

// log(x + eps), elementwise.
template <typename T>
Tensor<T> log_eps(const Tensor<T>& a, T eps) {
  std::vector<T> out(a.size());
  const T* x = a.ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(x[i] + eps);
  return make_op<T>(a.shape(), std::move(out), {a},
                    [eps](detail::Node<T>& n) {
                      if (T* g = grad_dst(*n.parents[0])) {
                        const auto& x2 = n.parents[0]->value;
                        for (std::size_t i = 0; i < n.grad.size(); ++i)
                          g[i] += n.grad[i] / (x2[i] + eps);
                      }
                    });
}

// ------------------------------------------------------------ reshaping

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.size())
    throw ConfigError("reshape: element count mismatch " +
                      shape_str(a.shape()) + " -> " + shape_str(shape));
  std::vector<T> out(a.data());
  return make_op<T>(std::move(shape), std::move(out), {a},
                    [](detail::Node<T>& n) {
                      if (T* g = grad_dst(*n.parents[0]))
                        kern::axpy(T(1), n.grad.data(), g, n.grad.size());
                    });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw InvalidInput("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis < 0 || axis >= static_cast<int>(s0.size()))
    throw ConfigError("concat: bad axis");
  Shape out_shape = s0;
  int total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != s0.size()) throw ConfigError("concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (static_cast<int>(d) != axis && s[d] != s0[d])
        throw ConfigError("concat: off-axis shape mismatch");
    }
    total += s[axis];
  }
  out_shape[axis] = total;

  std::size_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= s0[d];
  for (std::size_t d = axis + 1; d < s0.size(); ++d) inner *= s0[d];

  std::vector<T> out(numel(out_shape));
  std::vector<std::size_t> spans(parts.size());
  {
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      const std::size_t span = static_cast<std::size_t>(parts[pi].shape()[axis]) * inner;
      spans[pi] = span;
      const T* src = parts[pi].ptr();
      for (std::size_t o = 0; o < outer; ++o) {
        std::copy(src + o * span, src + (o + 1) * span,
                  out.begin() + o * (total * inner) + off);
      }
      off += span;
    }
  }
  return make_op<T>(
      out_shape, std::move(out), parts,
      [outer, inner, total, spans](detail::Node<T>& n) {
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < n.parents.size(); ++pi) {
          const std::size_t span = spans[pi];
          if (T* g = grad_dst(*n.parents[pi])) {
            for (std::size_t o = 0; o < outer; ++o) {
              const T* src = n.grad.data() + o * (total * inner) + off;
              kern::axpy(T(1), src, g + o * span, span);
            }
          }
          off += span;
        }
      });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, int axis, int start, int len) {
  const Shape& s = a.shape();
  if (axis < 0 || axis >= static_cast<int>(s.size()))
    throw ConfigError("slice: bad axis");
  if (start < 0 || len <= 0 || start + len > s[axis])
    throw ConfigError("slice: out of range");
  Shape out_shape = s;
  out_shape[axis] = len;
  std::size_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t in_span = static_cast<std::size_t>(s[axis]) * inner;
  const std::size_t out_span = static_cast<std::size_t>(len) * inner;
  std::vector<T> out(numel(out_shape));
  const T* src = a.ptr();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy(src + o * in_span + start * inner,
              src + o * in_span + start * inner + out_span,
              out.begin() + o * out_span);
  }
  return make_op<T>(out_shape, std::move(out), {a},
                    [outer, inner, in_span, out_span, start](detail::Node<T>& n) {
                      if (T* g = grad_dst(*n.parents[0])) {
                        for (std::size_t o = 0; o < outer; ++o) {
                          kern::axpy(T(1), n.grad.data() + o * out_span,
                                     g + o * in_span + start * inner, out_span);
                        }
                      }
                    });
}

// Swap the first two axes of a rank >= 2 tensor (copying transpose).
template <typename T>
Tensor<T> swap01(const Tensor<T>& x) {
  if (x.rank() < 2) throw ConfigError("swap01: rank must be >= 2");
  const Shape& s = x.shape();
  const std::size_t a = s[0], b = s[1];
  std::size_t inner = 1;
  for (std::size_t d = 2; d < s.size(); ++d) inner *= s[d];
  Shape out_shape = s;
  std::swap(out_shape[0], out_shape[1]);
  std::vector<T> out(x.size());
  const T* src = x.ptr();
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j)
      std::copy(src + (i * b + j) * inner, src + (i * b + j + 1) * inner,
                out.begin() + (j * a + i) * inner);
  return make_op<T>(out_shape, std::move(out), {x},
                    [a, b, inner](detail::Node<T>& n) {
                      if (T* g = grad_dst(*n.parents[0])) {
                        const T* gs = n.grad.data();
                        for (std::size_t i = 0; i < a; ++i)
                          for (std::size_t j = 0; j < b; ++j)
                            kern::axpy(T(1), gs + (j * a + i) * inner,
                                       g + (i * b + j) * inner, inner);
                      }
                    });
}

// ------------------------------------------------------- linear algebra

// C = A (m x k) * B (k x n)
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ConfigError("matmul: shapes " + shape_str(a.shape()) + " x " +
                      shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(static_cast<std::size_t>(m) * n);
  kern::gemm(m, n, k, a.ptr(), k, b.ptr(), n, out.data(), n, false);
  return make_op<T>(
      Shape{m, n}, std::move(out), {a, b}, [m, k, n](detail::Node<T>& nd) {
        const T* g = nd.grad.data();
        // dA += G * B^T : dot rows of G with rows of B^T == columns of B;
        // computed as dA[i,p] += dot(G[i,:], B[p,:]) via gemm_nt style.
        if (T* ga = grad_dst(*nd.parents[0])) {
          const T* bv = nd.parents[1]->value.data();
          for (int i = 0; i < m; ++i) {
            for (int p = 0; p < k; ++p)
              ga[static_cast<std::size_t>(i) * k + p] +=
                  kern::dot(g + static_cast<std::size_t>(i) * n,
                            bv + static_cast<std::size_t>(p) * n,
                            static_cast<std::size_t>(n));
          }
        }
        // dB += A^T * G : for each (i,p) axpy A[i,p] * G[i,:] into dB[p,:]
        if (T* gb = grad_dst(*nd.parents[1])) {
          const T* av = nd.parents[0]->value.data();
          for (int i = 0; i < m; ++i) {
            for (int p = 0; p < k; ++p)
              kern::axpy(av[static_cast<std::size_t>(i) * k + p],
                         g + static_cast<std::size_t>(i) * n,
                         gb + static_cast<std::size_t>(p) * n,
                         static_cast<std::size_t>(n));
          }
        }
      });
}

// y = x (n x in) * W^T (in x out) + bias; W stored (out x in).
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1))
    throw ConfigError("linear: shapes " + shape_str(x.shape()) + " with W " +
                      shape_str(w.shape()));
  const int n = x.dim(0), in = x.dim(1), out = w.dim(0);
  if (b.size() != static_cast<std::size_t>(out))
    throw ConfigError("linear: bias size mismatch");
  std::vector<T> y(static_cast<std::size_t>(n) * out);
  // y[i,o] = dot(x[i,:], w[o,:]) + b[o]
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < out; ++o) {
      y[static_cast<std::size_t>(i) * out + o] =
          kern::dot(x.ptr() + static_cast<std::size_t>(i) * in,
                    w.ptr() + static_cast<std::size_t>(o) * in,
                    static_cast<std::size_t>(in)) +
          b.ptr()[o];
    }
  }
  return make_op<T>(
      Shape{n, out}, std::move(y), {x, w, b},
      [n, in, out](detail::Node<T>& nd) {
        const T* g = nd.grad.data();
        const T* xv = nd.parents[0]->value.data();
        const T* wv = nd.parents[1]->value.data();
        if (T* gx = grad_dst(*nd.parents[0])) {
          // gx[i,:] += sum_o g[i,o] * w[o,:]
          for (int i = 0; i < n; ++i)
            for (int o = 0; o < out; ++o)
              kern::axpy(g[static_cast<std::size_t>(i) * out + o],
                         wv + static_cast<std::size_t>(o) * in,
                         gx + static_cast<std::size_t>(i) * in,
                         static_cast<std::size_t>(in));
        }
        if (T* gw = grad_dst(*nd.parents[1])) {
          // gw[o,:] += sum_i g[i,o] * x[i,:]
          for (int i = 0; i < n; ++i)
            for (int o = 0; o < out; ++o)
              kern::axpy(g[static_cast<std::size_t>(i) * out + o],
                         xv + static_cast<std::size_t>(i) * in,
                         gw + static_cast<std::size_t>(o) * in,
                         static_cast<std::size_t>(in));
        }
        if (T* gb = grad_dst(*nd.parents[2])) {
          for (int i = 0; i < n; ++i)
            for (int o = 0; o < out; ++o)
              gb[o] += g[static_cast<std::size_t>(i) * out + o];
        }
      });
}

// ------------------------------------------------------------- softmax

// Softmax along an arbitrary axis, max-shifted for stability.
template <typename T>
Tensor<T> softmax(const Tensor<T>& a, int axis) {
  const Shape& s = a.shape();
  if (axis < 0 || axis >= static_cast<int>(s.size()))
    throw ConfigError("softmax: bad axis");
  std::size_t outer = 1, inner = 1;
  const std::size_t c = static_cast<std::size_t>(s[axis]);
  for (int d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];

  std::vector<T> out(a.size());
  const T* x = a.ptr();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * c * inner + i;
      T mx = x[base];
      for (std::size_t j = 1; j < c; ++j)
        mx = std::max(mx, x[base + j * inner]);
      T denom = T(0);
      for (std::size_t j = 0; j < c; ++j) {
        const T e = std::exp(x[base + j * inner] - mx);
        out[base + j * inner] = e;
        denom += e;
      }
      const T inv = T(1) / denom;
      for (std::size_t j = 0; j < c; ++j) out[base + j * inner] *= inv;
    }
  }
  return make_op<T>(
      s, std::move(out), {a}, [outer, inner, c](detail::Node<T>& nd) {
        if (T* g = grad_dst(*nd.parents[0])) {
          const T* y = nd.value.data();
          const T* gy = nd.grad.data();
          for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t base = o * c * inner + i;
              T dotv = T(0);
              for (std::size_t j = 0; j < c; ++j)
                dotv += gy[base + j * inner] * y[base + j * inner];
              for (std::size_t j = 0; j < c; ++j) {
                const std::size_t idx = base + j * inner;
                g[idx] += y[idx] * (gy[idx] - dotv);
              }
            }
          }
        }
      });
}

}  // namespace binsight::nn
