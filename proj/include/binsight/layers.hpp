#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "binsight/ops.hpp"
#include "binsight/ops_conv.hpp"

namespace binsight::nn {

// Deterministic gaussian via Box-Muller; std::normal_distribution is not
// pinned across standard library implementations.
inline double gaussian(std::mt19937& rng) {
  double u1 = 0.0;
  do {
    u1 = (static_cast<double>(rng()) + 1.0) / 4294967297.0;
  } while (u1 <= 0.0);
  const double u2 = static_cast<double>(rng()) / 4294967296.0;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.141592653589793238462643383279 * u2);
}

template <typename T>
Tensor<T> randn_tensor(Shape shape, double stddev, std::mt19937& rng) {
  std::vector<T> data(numel(shape));
  for (auto& v : data) v = static_cast<T>(stddev * gaussian(rng));
  return Tensor<T>::from_data(std::move(shape), std::move(data), true);
}

// Named parameter registry; ordering is the registration order and is the
// contract for checkpoints and the optimizer.
template <typename T>
struct ParamSet {
  std::vector<std::pair<std::string, Tensor<T>>> items;

  void add(const std::string& name, const Tensor<T>& t) {
    for (const auto& [n, _] : items) {
      if (n == name) throw ConfigError("duplicate parameter name: " + name);
    }
    items.emplace_back(name, t);
  }
  void zero_grad() {
    for (auto& [_, t] : items) t.zero_grad();
  }
};

template <typename T>
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(int in_ch, int out_ch, int kh, int kw, int stride, int pad,
              int dilation, std::mt19937& rng)
      : geom_{kh, kw, stride, stride, pad, pad, dilation, dilation} {
    const double stddev = std::sqrt(2.0 / (in_ch * kh * kw));
    weight_ = randn_tensor<T>({out_ch, in_ch, kh, kw}, stddev, rng);
    bias_ = Tensor<T>::zeros({out_ch}, true);
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    return conv2d(x, weight_, bias_, geom_);
  }
  void collect(ParamSet<T>& ps, const std::string& prefix) {
    ps.add(prefix + ".weight", weight_);
    ps.add(prefix + ".bias", bias_);
  }
  const Conv2dGeom& geom() const { return geom_; }
  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  Conv2dGeom geom_;
  Tensor<T> weight_, bias_;
};

template <typename T>
class ConvTranspose2dLayer {
 public:
  ConvTranspose2dLayer() = default;
  ConvTranspose2dLayer(int in_ch, int out_ch, int kh, int kw, int stride,
                       int pad, std::mt19937& rng)
      : geom_{kh, kw, stride, stride, pad, pad, 1, 1} {
    const double stddev = std::sqrt(2.0 / (in_ch * kh * kw));
    weight_ = randn_tensor<T>({in_ch, out_ch, kh, kw}, stddev, rng);
    bias_ = Tensor<T>::zeros({out_ch}, true);
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    return conv_transpose2d(x, weight_, bias_, geom_);
  }
  void collect(ParamSet<T>& ps, const std::string& prefix) {
    ps.add(prefix + ".weight", weight_);
    ps.add(prefix + ".bias", bias_);
  }
  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  Conv2dGeom geom_;
  Tensor<T> weight_, bias_;
};

template <typename T>
class BatchNorm2dLayer {
 public:
  BatchNorm2dLayer() = default;
  explicit BatchNorm2dLayer(int channels)
      : gamma_(Tensor<T>::full({channels}, T(1), true)),
        beta_(Tensor<T>::zeros({channels}, true)),
        running_mean_(channels, T(0)),
        running_var_(channels, T(1)) {}

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    return batch_norm(x, gamma_, beta_, running_mean_, running_var_, training,
                      momentum_, eps_);
  }
  void collect(ParamSet<T>& ps, const std::string& prefix) {
    ps.add(prefix + ".gamma", gamma_);
    ps.add(prefix + ".beta", beta_);
  }
  std::vector<T>& running_mean() { return running_mean_; }
  std::vector<T>& running_var() { return running_var_; }

 private:
  Tensor<T> gamma_, beta_;
  std::vector<T> running_mean_, running_var_;
  T momentum_ = T(0.9);
  T eps_ = T(1e-5);
};

template <typename T>
class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(int in, int out, std::mt19937& rng) {
    const double stddev = std::sqrt(2.0 / in);
    weight_ = randn_tensor<T>({out, in}, stddev, rng);
    bias_ = Tensor<T>::zeros({out}, true);
  }
  Tensor<T> forward(const Tensor<T>& x) const {
    return linear(x, weight_, bias_);
  }
  void collect(ParamSet<T>& ps, const std::string& prefix) {
    ps.add(prefix + ".weight", weight_);
    ps.add(prefix + ".bias", bias_);
  }
  Tensor<T>& weight() { return weight_; }

 private:
  Tensor<T> weight_, bias_;
};

// Gated recurrent unit, three gates with input and hidden biases.
template <typename T>
class GruLayer {
 public:
  GruLayer() = default;
  GruLayer(int input_size, int hidden_size, std::mt19937& rng)
      : input_size_(input_size), hidden_size_(hidden_size) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
    auto uniform_tensor = [&](Shape shape) {
      std::vector<T> data(numel(shape));
      for (auto& v : data) {
        const double u = static_cast<double>(rng()) / 4294967296.0;
        v = static_cast<T>((2.0 * u - 1.0) * bound);
      }
      return Tensor<T>::from_data(std::move(shape), std::move(data), true);
    };
    for (int gate = 0; gate < 3; ++gate) {
      w_in_[gate] = uniform_tensor({hidden_size, input_size});
      w_hid_[gate] = uniform_tensor({hidden_size, hidden_size});
      b_in_[gate] = uniform_tensor({hidden_size});
      b_hid_[gate] = uniform_tensor({hidden_size});
    }
  }

  int hidden_size() const { return hidden_size_; }
  int input_size() const { return input_size_; }

  // seq (T, N, D), h0 (N, H) -> outputs (T, N, H) and the final hidden.
  std::pair<Tensor<T>, Tensor<T>> forward(const Tensor<T>& seq,
                                          const Tensor<T>& h0) const {
    if (seq.rank() != 3 || seq.dim(2) != input_size_)
      throw ConfigError("gru: expected (T, N, " +
                        std::to_string(input_size_) + "), got " +
                        shape_str(seq.shape()));
    const int steps = seq.dim(0), batch = seq.dim(1);
    if (h0.rank() != 2 || h0.dim(0) != batch || h0.dim(1) != hidden_size_)
      throw ConfigError("gru: bad initial hidden state shape " +
                        shape_str(h0.shape()));
    Tensor<T> h = h0;
    std::vector<Tensor<T>> outputs;
    outputs.reserve(steps);
    for (int t = 0; t < steps; ++t) {
      Tensor<T> x = reshape(slice(seq, 0, t, 1), {batch, input_size_});
      Tensor<T> r = sigmoid(add(linear(x, w_in_[0], b_in_[0]),
                                linear(h, w_hid_[0], b_hid_[0])));
      Tensor<T> z = sigmoid(add(linear(x, w_in_[1], b_in_[1]),
                                linear(h, w_hid_[1], b_hid_[1])));
      Tensor<T> cand = tanh_op(add(linear(x, w_in_[2], b_in_[2]),
                                   mul(r, linear(h, w_hid_[2], b_hid_[2]))));
      // h' = (1 - z) * cand + z * h
      Tensor<T> one_minus_z = add_scalar(scale(z, T(-1)), T(1));
      h = add(mul(one_minus_z, cand), mul(z, h));
      outputs.push_back(reshape(h, {1, batch, hidden_size_}));
    }
    return {concat(outputs, 0), h};
  }

  void collect(ParamSet<T>& ps, const std::string& prefix) {
    static const char* names[3] = {"r", "z", "n"};
    for (int gate = 0; gate < 3; ++gate) {
      ps.add(prefix + ".w_i" + names[gate], w_in_[gate]);
      ps.add(prefix + ".w_h" + names[gate], w_hid_[gate]);
      ps.add(prefix + ".b_i" + names[gate], b_in_[gate]);
      ps.add(prefix + ".b_h" + names[gate], b_hid_[gate]);
    }
  }

 private:
  int input_size_ = 0, hidden_size_ = 0;
  Tensor<T> w_in_[3], w_hid_[3], b_in_[3], b_hid_[3];
};

// Bias-corrected Adam. Moment buffers are keyed by parameter order.
template <typename T>
class Adam {
 public:
  struct Settings {
    T lr = T(1e-5);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
  };

  Adam() = default;
  explicit Adam(Settings s) : s_(s) {
    if (!(s_.lr > T(0)) || s_.beta1 < T(0) || s_.beta1 >= T(1) ||
        s_.beta2 < T(0) || s_.beta2 >= T(1))
      throw ConfigError("adam: invalid settings");
  }

  void step(ParamSet<T>& params) {
    if (m_.empty()) {
      m_.resize(params.items.size());
      v_.resize(params.items.size());
      for (std::size_t i = 0; i < params.items.size(); ++i) {
        m_[i].assign(params.items[i].second.size(), T(0));
        v_[i].assign(params.items[i].second.size(), T(0));
      }
    }
    if (m_.size() != params.items.size())
      throw ConfigError("adam: parameter set changed size");
    ++t_;
    const T bc1 = T(1) - std::pow(s_.beta1, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(s_.beta2, static_cast<T>(t_));
    for (std::size_t i = 0; i < params.items.size(); ++i) {
      auto& tensor = params.items[i].second;
      const auto& g = tensor.grad();
      auto& val = tensor.data();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < val.size(); ++j) {
        m[j] = s_.beta1 * m[j] + (T(1) - s_.beta1) * g[j];
        v[j] = s_.beta2 * v[j] + (T(1) - s_.beta2) * g[j] * g[j];
        const T mhat = m[j] / bc1;
        const T vhat = v[j] / bc2;
        val[j] -= s_.lr * mhat / (std::sqrt(vhat) + s_.eps);
      }
    }
  }

  long step_count() const { return t_; }
  const Settings& settings() const { return s_; }

  // Optimizer state exposed for checkpointing.
  std::vector<std::vector<T>>& moments1() { return m_; }
  std::vector<std::vector<T>>& moments2() { return v_; }
  void set_step_count(long t) { t_ = t; }

 private:
  Settings s_;
  long t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace binsight::nn
