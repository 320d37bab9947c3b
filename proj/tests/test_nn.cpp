#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "binsight/layers.hpp"
#include "binsight/ops.hpp"
#include "binsight/ops_conv.hpp"
#include "binsight/ops_spectral.hpp"

// Gradient oracle: central finite differences with eps = 1e-4 in double
// precision; every layer's analytic gradient must agree to 1e-3 relative.

namespace {

using binsight::nn::Shape;
using binsight::nn::Tensor;
using D = double;

Tensor<D> randt(Shape shape, std::mt19937& rng, double lo = -1.0,
                double hi = 1.0, bool requires_grad = true) {
  std::vector<D> data(binsight::nn::numel(shape));
  for (auto& v : data)
    v = lo + (hi - lo) * (static_cast<double>(rng()) / 4294967296.0);
  return Tensor<D>::from_data(std::move(shape), std::move(data),
                              requires_grad);
}

// Rebuilds the graph via loss_fn for every probe. Checks d loss / d param.
void check_grad(Tensor<D>& param,
                const std::function<Tensor<D>()>& loss_fn,
                double tol = 1e-3, double eps = 1e-4) {
  Tensor<D> loss = loss_fn();
  param.zero_grad();
  loss.backward();
  const std::vector<D> analytic = param.grad();

  double worst = 0.0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const D saved = param.data()[i];
    param.data()[i] = saved + eps;
    const D up = loss_fn().item();
    param.data()[i] = saved - eps;
    const D dn = loss_fn().item();
    param.data()[i] = saved;
    const D fd = (up - dn) / (2 * eps);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
    worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
  }
  CHECK(worst < tol);
}

}  // namespace

TEST_CASE("backward on simple expressions matches analytic gradients") {
  auto x = Tensor<D>::from_data({2}, {1.0, 2.0}, true);
  auto loss = binsight::nn::sum(binsight::nn::mul(x, x));
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));

  auto y = Tensor<D>::from_data({3}, {1.0, -2.0, 0.5}, true);
  auto s = binsight::nn::sum(y);
  s.backward();
  for (double g : y.grad()) CHECK(g == doctest::Approx(1.0));

  CHECK_THROWS_AS(binsight::nn::mul(x, y), binsight::ConfigError);
  CHECK_THROWS_AS(x.backward(), binsight::InvalidInput);  // non-scalar
}

TEST_CASE("activation values") {
  auto x = Tensor<D>::from_data({2}, {-1.0, 2.0}, false);
  auto r = binsight::nn::relu(x);
  CHECK(r.data() == std::vector<D>{0.0, 2.0});
  auto sg = binsight::nn::sigmoid(Tensor<D>::from_data({1}, {0.0}, false));
  CHECK(sg.data()[0] == doctest::Approx(0.5));
  auto sm = binsight::nn::softmax(Tensor<D>::from_data({2}, {0.0, 0.0}, false), 0);
  CHECK(sm.data()[0] == doctest::Approx(0.5));
  CHECK(sm.data()[1] == doctest::Approx(0.5));
}

TEST_CASE("elementwise and reduction gradients (finite differences)") {
  std::mt19937 rng(101);
  auto a = randt({3, 4}, rng, 0.2, 1.5);  // keep relu/l1 off their kinks
  auto b = randt({3, 4}, rng, -1.5, -0.2);

  check_grad(a, [&] { return binsight::nn::mean(binsight::nn::mul(a, b)); });
  check_grad(b, [&] { return binsight::nn::mean(binsight::nn::mul(a, b)); });
  check_grad(a, [&] { return binsight::nn::sum(binsight::nn::relu(a)); });
  check_grad(a, [&] { return binsight::nn::mean(binsight::nn::sigmoid(a)); });
  check_grad(a, [&] { return binsight::nn::mean(binsight::nn::tanh_op(a)); });
  check_grad(a, [&] { return binsight::nn::mse(a, b); });
  check_grad(b, [&] { return binsight::nn::mse(a, b); });
  check_grad(a, [&] { return binsight::nn::l1_mean(a, b); });
  check_grad(a, [&] { return binsight::nn::mean(binsight::nn::log_eps(a, 1e-7)); });
  check_grad(a, [&] {
    return binsight::nn::mean(binsight::nn::softmax(a, 1));
  });
  check_grad(a, [&] {
    std::vector<Tensor<D>> parts{a, b};
    return binsight::nn::mean(
        binsight::nn::slice(binsight::nn::concat(parts, 1), 1, 2, 4));
  });
  check_grad(a, [&] {
    return binsight::nn::mean(binsight::nn::reshape(a, Shape{2, 6}));
  });
}

TEST_CASE("matmul and linear gradients") {
  std::mt19937 rng(102);
  auto a = randt({3, 5}, rng);
  auto b = randt({5, 2}, rng);
  check_grad(a, [&] { return binsight::nn::mean(binsight::nn::matmul(a, b)); });
  check_grad(b, [&] { return binsight::nn::mean(binsight::nn::matmul(a, b)); });

  auto x = randt({4, 6}, rng);
  auto w = randt({3, 6}, rng);
  auto bias = randt({3}, rng);
  auto loss = [&] {
    return binsight::nn::mse(binsight::nn::linear(x, w, bias),
                             Tensor<D>::zeros({4, 3}));
  };
  check_grad(x, loss);
  check_grad(w, loss);
  check_grad(bias, loss);
}

TEST_CASE("conv2d values: ones kernel, identity, and the size chain") {
  std::mt19937 rng(103);
  binsight::nn::Conv2dGeom g;
  g.kh = g.kw = 2;

  auto x = Tensor<D>::full({1, 1, 3, 3}, 1.0);
  auto w = Tensor<D>::full({1, 1, 2, 2}, 1.0);
  auto b = Tensor<D>::zeros({1});
  auto y = binsight::nn::conv2d(x, w, b, g);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  for (double v : y.data()) CHECK(v == doctest::Approx(4.0));

  // 1x1 identity kernel
  binsight::nn::Conv2dGeom id;
  auto xi = randt({2, 1, 4, 5}, rng);
  auto wi = Tensor<D>::full({1, 1, 1, 1}, 1.0);
  auto yi = binsight::nn::conv2d(xi, wi, b, id);
  CHECK(yi.data() == xi.data());

  // four stride-2 4x4 pad-1 convolutions: 257x97 -> 16x6
  binsight::nn::Conv2dGeom s2;
  s2.kh = s2.kw = 4;
  s2.sh = s2.sw = 2;
  s2.ph = s2.pw = 1;
  int h = 257, wdim = 97;
  for (int i = 0; i < 4; ++i) {
    h = s2.out_dim(h, true);
    wdim = s2.out_dim(wdim, false);
  }
  CHECK(h == 16);
  CHECK(wdim == 6);

  // five stride-2 up-convolutions: 16x6 -> 512x192
  binsight::nn::Conv2dGeom up;
  up.kh = up.kw = 4;
  up.sh = up.sw = 2;
  up.ph = up.pw = 1;
  int uh = 16, uw = 6;
  for (int i = 0; i < 5; ++i) {
    uh = up.tr_out_dim(uh, true);
    uw = up.tr_out_dim(uw, false);
  }
  CHECK(uh == 512);
  CHECK(uw == 192);

  CHECK_THROWS_AS(
      binsight::nn::conv2d(randt({1, 3, 4, 4}, rng), randt({2, 4, 2, 2}, rng),
                           Tensor<D>::zeros({2}), g),
      binsight::ConfigError);
}

TEST_CASE("conv_transpose2d value and adjoint identity") {
  // stride 2, kernel 2, 1x1 input of value v, all-ones weight -> 2x2 of v
  binsight::nn::Conv2dGeom g;
  g.kh = g.kw = 2;
  g.sh = g.sw = 2;
  auto x = Tensor<D>::full({1, 1, 1, 1}, 3.25);
  auto w = Tensor<D>::full({1, 1, 2, 2}, 1.0);
  auto y = binsight::nn::conv_transpose2d(x, w, Tensor<D>::zeros({1}), g);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  for (double v : y.data()) CHECK(v == doctest::Approx(3.25));

  // <conv(x), y> == <x, conv_transpose(y)> with the shared kernel
  std::mt19937 rng(104);
  binsight::nn::Conv2dGeom cg;
  cg.kh = cg.kw = 3;
  cg.sh = cg.sw = 2;
  cg.ph = cg.pw = 1;
  auto xr = randt({2, 3, 9, 7}, rng, -1, 1, false);
  auto wr = randt({4, 3, 3, 3}, rng, -1, 1, false);
  auto zero3 = Tensor<D>::zeros({3});
  auto zero4 = Tensor<D>::zeros({4});
  auto cx = binsight::nn::conv2d(xr, wr, zero4, cg);
  auto yr = randt(cx.shape(), rng, -1, 1, false);
  auto cty = binsight::nn::conv_transpose2d(yr, wr, zero3, cg);
  REQUIRE(cty.shape() == xr.shape());
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < cx.size(); ++i) lhs += cx.data()[i] * yr.data()[i];
  for (std::size_t i = 0; i < xr.size(); ++i) rhs += xr.data()[i] * cty.data()[i];
  CHECK(std::abs(lhs - rhs) / std::max(std::abs(lhs), 1.0) < 1e-9);
}

TEST_CASE("conv2d / conv_transpose2d gradients (finite differences)") {
  std::mt19937 rng(105);
  binsight::nn::Conv2dGeom g;
  g.kh = 3;
  g.kw = 2;
  g.sh = 2;
  g.sw = 1;
  g.ph = 1;
  g.pw = 1;
  auto x = randt({2, 2, 5, 4}, rng);
  auto w = randt({3, 2, 3, 2}, rng);
  auto b = randt({3}, rng);
  auto tgt = Tensor<D>::zeros({2, 3, 3, 5});
  auto loss = [&] {
    return binsight::nn::mse(binsight::nn::conv2d(x, w, b, g), tgt);
  };
  check_grad(x, loss);
  check_grad(w, loss);
  check_grad(b, loss);

  // dilated variant
  binsight::nn::Conv2dGeom gd;
  gd.kh = gd.kw = 3;
  gd.ph = gd.pw = 2;
  gd.dh = gd.dw = 2;
  auto xd = randt({1, 2, 6, 6}, rng);
  auto wd = randt({2, 2, 3, 3}, rng);
  auto bd = randt({2}, rng);
  auto lossd = [&] {
    return binsight::nn::mean(binsight::nn::conv2d(xd, wd, bd, gd));
  };
  check_grad(xd, lossd);
  check_grad(wd, lossd);

  binsight::nn::Conv2dGeom gt;
  gt.kh = gt.kw = 4;
  gt.sh = gt.sw = 2;
  gt.ph = gt.pw = 1;
  auto xt = randt({2, 3, 3, 2}, rng);
  auto wt = randt({3, 2, 4, 4}, rng);
  auto bt = randt({2}, rng);
  auto losst = [&] {
    return binsight::nn::mean(binsight::nn::conv_transpose2d(xt, wt, bt, gt));
  };
  check_grad(xt, losst);
  check_grad(wt, losst);
  check_grad(bt, losst);
}

TEST_CASE("batch_norm statistics and gradients") {
  std::mt19937 rng(106);
  const int n = 4, c = 3, h = 5, w = 5;
  auto x = randt({n, c, h, w}, rng, -2, 2);
  auto bn = binsight::nn::BatchNorm2dLayer<D>(c);
  auto y = bn.forward(x, true);

  // per-channel mean ~ 0 and variance ~ 1 in training mode (gamma=1, beta=0)
  const std::size_t plane = h * w;
  for (int ch = 0; ch < c; ++ch) {
    double mean = 0.0, var = 0.0;
    for (int s = 0; s < n; ++s)
      for (std::size_t i = 0; i < plane; ++i)
        mean += y.data()[(s * c + ch) * plane + i];
    mean /= n * plane;
    for (int s = 0; s < n; ++s)
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = y.data()[(s * c + ch) * plane + i] - mean;
        var += d * d;
      }
    var /= n * plane;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }

  // gamma = 0 -> output = beta
  auto gamma0 = Tensor<D>::zeros({c}, true);
  auto beta = Tensor<D>::full({c}, 0.75, true);
  std::vector<D> rm(c, 0.0), rv(c, 1.0);
  auto y0 = binsight::nn::batch_norm(x, gamma0, beta, rm, rv, true);
  for (double v : y0.data()) CHECK(v == doctest::Approx(0.75));

  // gradients, both modes
  auto gamma = randt({c}, rng, 0.5, 1.5);
  auto beta2 = randt({c}, rng, -0.5, 0.5);
  std::vector<D> rm2(c, 0.1), rv2(c, 0.9);
  auto tgt = randt({n, c, h, w}, rng, -1, 1, false);
  for (bool training : {true, false}) {
    auto loss = [&] {
      std::vector<D> rm_copy = rm2, rv_copy = rv2;  // keep stats frozen
      return binsight::nn::mse(
          binsight::nn::batch_norm(x, gamma, beta2, rm_copy, rv_copy, training),
          tgt);
    };
    check_grad(x, loss);
    check_grad(gamma, loss);
    check_grad(beta2, loss);
  }

  auto empty = Tensor<D>::zeros({0, c, h, w});
  std::vector<D> rm3(c), rv3(c);
  CHECK_THROWS_AS(binsight::nn::batch_norm(empty, gamma, beta2, rm3, rv3, true),
                  binsight::InvalidInput);
}

TEST_CASE("bilinear resize gradients") {
  std::mt19937 rng(107);
  auto x = randt({1, 2, 4, 3}, rng);
  check_grad(x, [&] {
    return binsight::nn::mean(binsight::nn::bilinear_resize(x, 9, 7));
  });
  check_grad(x, [&] {
    return binsight::nn::mean(binsight::nn::bilinear_resize(x, 2, 2));
  });
}

TEST_CASE("gru: zero fixed point, single-cell equivalence, gradients") {
  std::mt19937 rng(108);
  binsight::nn::GruLayer<D> gru(3, 4, rng);

  // zero biases -> zero input and hidden stay exactly zero
  binsight::nn::ParamSet<D> ps;
  gru.collect(ps, "gru");
  for (auto& [name, t] : ps.items) {
    if (name.find(".b_") != std::string::npos)
      std::fill(t.data().begin(), t.data().end(), 0.0);
  }
  auto zseq = Tensor<D>::zeros({5, 2, 3});
  auto zh = Tensor<D>::zeros({2, 4});
  auto [zout, zlast] = gru.forward(zseq, zh);
  for (double v : zout.data()) CHECK(v == 0.0);

  // restore random biases, check T=1 equals one manual cell
  std::mt19937 rng2(109);
  binsight::nn::GruLayer<D> gru2(2, 3, rng2);
  auto seq1 = randt({1, 1, 2}, rng2, -1, 1, false);
  auto h0 = randt({1, 3}, rng2, -1, 1, false);
  auto [out1, last1] = gru2.forward(seq1, h0);

  binsight::nn::ParamSet<D> ps2;
  gru2.collect(ps2, "g");
  auto get = [&](const std::string& name) -> Tensor<D>& {
    for (auto& [n2, t] : ps2.items)
      if (n2 == "g" + name) return t;
    throw std::runtime_error("missing " + name);
  };
  auto cell = [&](const std::vector<D>& x, const std::vector<D>& h) {
    std::vector<D> hn(3);
    for (int u = 0; u < 3; ++u) {
      auto gate = [&](const char* wi, const char* wh, const char* bi,
                      const char* bh) {
        double acc = get(bi).data()[u] + get(bh).data()[u];
        for (int i = 0; i < 2; ++i) acc += get(wi).data()[u * 2 + i] * x[i];
        for (int i = 0; i < 3; ++i) acc += get(wh).data()[u * 3 + i] * h[i];
        return acc;
      };
      const double r = 1.0 / (1.0 + std::exp(-gate(".w_ir", ".w_hr", ".b_ir", ".b_hr")));
      const double z = 1.0 / (1.0 + std::exp(-gate(".w_iz", ".w_hz", ".b_iz", ".b_hz")));
      double nacc = get(".b_in").data()[u];
      for (int i = 0; i < 2; ++i) nacc += get(".w_in").data()[u * 2 + i] * x[i];
      double hacc = get(".b_hn").data()[u];
      for (int i = 0; i < 3; ++i) hacc += get(".w_hn").data()[u * 3 + i] * h[i];
      const double cand = std::tanh(nacc + r * hacc);
      hn[u] = (1.0 - z) * cand + z * h[u];
    }
    return hn;
  };
  const auto hn = cell(seq1.data(), h0.data());
  for (int u = 0; u < 3; ++u)
    CHECK(out1.data()[u] == doctest::Approx(hn[u]).epsilon(1e-12));

  // finite differences through a 2-step sequence for every gate weight
  auto seq = randt({2, 2, 2}, rng2, -1, 1, false);
  auto h00 = Tensor<D>::zeros({2, 3});
  auto loss = [&] {
    auto [outs, hlast] = gru2.forward(seq, h00);
    return binsight::nn::mean(outs);
  };
  for (auto& [name, t] : ps2.items) check_grad(t, loss);
}

TEST_CASE("softmax rows sum to one and cross-entropy matches hand values") {
  std::mt19937 rng(110);
  auto logits = randt({2, 4, 3, 3}, rng, -2, 2);
  auto probs = binsight::nn::softmax(logits, 1);
  for (int s = 0; s < 2; ++s)
    for (int px = 0; px < 9; ++px) {
      double acc = 0.0;
      for (int c = 0; c < 4; ++c) acc += probs.data()[(s * 4 + c) * 9 + px];
      CHECK(acc == doctest::Approx(1.0).epsilon(1e-9));
    }

  // uniform prediction over 4 classes -> ln 4
  auto uni = Tensor<D>::full({1, 4, 2, 2}, 0.25);
  auto labels = std::vector<int>{0, 1, 2, 3};
  auto ce = binsight::nn::cross_entropy_mean(uni, labels);
  CHECK(ce.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // 2-pixel hand case: probs (0.5, 0.25) on the targets
  std::vector<D> pv = {0.5, 0.25, 0.5, 0.75, 0.0, 0.0, 0.0, 0.0};
  auto p2 = Tensor<D>::from_data({1, 4, 1, 2}, std::move(pv));
  auto ce2 = binsight::nn::cross_entropy_mean(p2, std::vector<int>{0, 0});
  CHECK(ce2.item() ==
        doctest::Approx((-std::log(0.5) - std::log(0.25)) / 2).epsilon(1e-12));

  CHECK_THROWS_AS(
      binsight::nn::cross_entropy_mean(uni, std::vector<int>{0, 1, 2, 9}),
      binsight::InvalidInput);

  // gradient through softmax + cross entropy
  auto loss = [&] {
    return binsight::nn::cross_entropy_mean(binsight::nn::softmax(logits, 1),
                                            std::vector<int>{0, 1, 2, 3, 0, 1,
                                                             2, 3, 0, 1, 2, 3,
                                                             0, 1, 2, 3, 0, 1});
  };
  check_grad(logits, loss);
}

TEST_CASE("adam: zero grad is a no-op, first step moves by lr*sign(g)") {
  using binsight::nn::Adam;
  auto p = Tensor<D>::from_data({2}, {1.0, -2.0}, true);
  binsight::nn::ParamSet<D> ps;
  ps.add("p", p);

  typename Adam<D>::Settings st;
  st.lr = 1e-3;
  st.eps = 1e-12;

  {
    Adam<D> opt(st);
    p.zero_grad();
    opt.step(ps);
    CHECK(p.data()[0] == doctest::Approx(1.0));
    CHECK(p.data()[1] == doctest::Approx(-2.0));
  }
  {
    Adam<D> opt(st);  // fresh state: t = 1 on the probe step
    p.grad()[0] = 0.37;
    p.grad()[1] = -41.0;
    opt.step(ps);
    CHECK(p.data()[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-9));
    CHECK(p.data()[1] == doctest::Approx(-2.0 + 1e-3).epsilon(1e-9));
  }
}

TEST_CASE("parameters off the loss path keep zero gradients") {
  auto x = Tensor<D>::from_data({2}, {1.0, 2.0}, true);
  auto unused = Tensor<D>::from_data({2}, {3.0, 4.0}, true);
  x.zero_grad();
  unused.zero_grad();
  auto loss = binsight::nn::sum(x);
  loss.backward();
  CHECK(unused.grad() == std::vector<D>{0.0, 0.0});
  CHECK(x.grad() == std::vector<D>{1.0, 1.0});
}
