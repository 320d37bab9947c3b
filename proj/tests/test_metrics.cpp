#include <doctest.h>

#include <cmath>
#include <random>

#include "binsight/error.hpp"
#include "binsight/losses.hpp"
#include "binsight/metrics.hpp"

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Confusion-matrix oracle for IoU.
struct IouOracle {
  std::map<int, double> per_class;
  std::vector<int> defined_classes;
  double mean = 0.0;

  IouOracle(const std::vector<int>& pred, const std::vector<int>& gt,
            const std::set<int>& classes) {
    double acc = 0.0;
    for (int cls : classes) {
      long tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        tp += pred[i] == cls && gt[i] == cls;
        fp += pred[i] == cls && gt[i] != cls;
        fn += pred[i] != cls && gt[i] == cls;
      }
      if (tp + fp + fn == 0) continue;
      const double iou = static_cast<double>(tp) / (tp + fp + fn);
      per_class[cls] = iou;
      defined_classes.push_back(cls);
      acc += iou;
    }
    mean = defined_classes.empty() ? 0.0 : acc / defined_classes.size();
  }
};

}  // namespace

TEST_CASE("miou hand cases") {
  const std::set<int> fg{1, 2, 3};

  // perfect prediction with all classes present
  std::vector<int> all{0, 1, 2, 3, 1, 2, 3, 0};
  auto r = binsight::metrics::miou(all, all, fg);
  CHECK(r.mean == doctest::Approx(1.0));

  // [[1,0],[0,0]] vs [[1,1],[0,0]] on class 1: IoU = 1/2
  std::vector<int> pred{1, 0, 0, 0};
  std::vector<int> gt{1, 1, 0, 0};
  r = binsight::metrics::miou(pred, gt, {1});
  CHECK(r.mean == doctest::Approx(0.5));
  CHECK(r.per_class.at(1).value() == doctest::Approx(0.5));

  // class absent from both is excluded, not a zero
  r = binsight::metrics::miou(pred, gt, {1, 3});
  CHECK_FALSE(r.per_class.at(3).has_value());
  CHECK(r.mean == doctest::Approx(0.5));
}

TEST_CASE("miou matches the confusion-matrix oracle on random grids") {
  std::mt19937 rng(61);
  const std::set<int> fg{1, 2, 3};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int> pred(48), gt(48);
    for (auto& v : pred) v = rng() % 4;
    for (auto& v : gt) v = rng() % (trial % 3 == 0 ? 2 : 4);
    const auto got = binsight::metrics::miou(pred, gt, fg);
    const IouOracle want(pred, gt, fg);
    CHECK(got.mean == doctest::Approx(want.mean).epsilon(1e-15));
    for (int cls : fg) {
      if (want.per_class.count(cls)) {
        CHECK(got.per_class.at(cls).value() ==
              doctest::Approx(want.per_class.at(cls)).epsilon(1e-15));
      } else {
        CHECK_FALSE(got.per_class.at(cls).has_value());
      }
    }
  }
}

TEST_CASE("depth metrics hand cases") {
  std::vector<float> g{2.0f};
  std::vector<float> p{3.0f};
  auto r = binsight::metrics::depth_metrics(p, g);
  CHECK(r.abs_rel == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.sq_rel == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.rmse == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.mse == doctest::Approx(1.0).epsilon(1e-12));

  auto zero = binsight::metrics::depth_metrics(g, g);
  CHECK(zero.abs_rel == 0.0);
  CHECK(zero.rmse == 0.0);

  // pred = 2 * gt everywhere -> AbsRel = 1
  std::vector<float> g2{1.0f, 2.0f, 5.0f};
  std::vector<float> p2{2.0f, 4.0f, 10.0f};
  CHECK(binsight::metrics::depth_metrics(p2, g2).abs_rel ==
        doctest::Approx(1.0).epsilon(1e-12));

  // non-positive ground truth is excluded
  std::vector<float> g3{2.0f, 0.0f};
  std::vector<float> p3{3.0f, 9.0f};
  auto r3 = binsight::metrics::depth_metrics(p3, g3);
  CHECK(r3.excluded == 1);
  CHECK(r3.rmse == doctest::Approx(1.0));
}

TEST_CASE("endpoint error hand cases") {
  // (2, H, W) planes with one pixel
  std::vector<float> z{0.0f, 0.0f};
  std::vector<float> v{3.0f, 4.0f};
  CHECK(binsight::metrics::epe(v, z) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(binsight::metrics::epe(v, v) == 0.0);

  // translation invariance
  std::mt19937 rng(62);
  std::vector<float> a(18), b(18), at(18), bt(18);
  for (std::size_t i = 0; i < 18; ++i) {
    a[i] = static_cast<float>(rng() % 100) / 10.0f;
    b[i] = static_cast<float>(rng() % 100) / 10.0f;
    const float off = i < 9 ? 1.25f : -0.5f;
    at[i] = a[i] + off;
    bt[i] = b[i] + off;
  }
  CHECK(binsight::metrics::epe(at, bt) ==
        doctest::Approx(binsight::metrics::epe(a, b)).epsilon(1e-6));
}

TEST_CASE("l2 loss hand case via mse op") {
  using binsight::nn::Tensor;
  auto pred = Tensor<double>::from_data({2}, {0.0, 0.0});
  auto tgt = Tensor<double>::from_data({2}, {3.0, 4.0});
  CHECK(binsight::nn::mse(pred, tgt).item() == doctest::Approx(12.5));
  // homogeneity: scaling both by c scales the loss by c^2
  auto pred2 = Tensor<double>::from_data({2}, {0.0, 0.0});
  auto tgt2 = Tensor<double>::from_data({2}, {6.0, 8.0});
  CHECK(binsight::nn::mse(pred2, tgt2).item() == doctest::Approx(4 * 12.5));
}

TEST_CASE("total loss follows the weighted-sum form") {
  using binsight::nn::Tensor;
  binsight::metrics::LossWeights w;  // 0.2 / 0.2 / 0.2
  auto one = Tensor<double>::scalar(1.0);
  auto total = binsight::metrics::total_loss(one, one, one, one, w);
  CHECK(total.item() == doctest::Approx(1.6).epsilon(1e-12));

  // only the semantic part enabled
  auto absent = Tensor<double>();
  CHECK(binsight::metrics::total_loss(one, absent, absent, absent, w).item() ==
        doctest::Approx(1.0));

  // ddsp preset weight
  binsight::metrics::LossWeights wd;
  wd.lambda3 = 0.02;
  CHECK(binsight::metrics::total_loss(one, absent, absent, one, wd).item() ==
        doctest::Approx(1.02));

  // linearity in each part
  auto three = Tensor<double>::scalar(3.0);
  CHECK(binsight::metrics::total_loss(one, three, absent, absent, w).item() ==
        doctest::Approx(1.0 + 0.2 * 3.0));
}

TEST_CASE("multiscale spectral loss: zero at identity, positive otherwise") {
  using binsight::nn::Tensor;
  binsight::metrics::LossWeights w;
  CHECK(w.fft_sizes == std::vector<int>{256, 128, 64});
  CHECK(w.alpha_spec == 1.0);

  std::vector<double> tone(2000);
  for (std::size_t i = 0; i < tone.size(); ++i)
    tone[i] = 0.4 * std::sin(2.0 * kPi * 440.0 * i / 16000.0);
  auto a = Tensor<double>::from_data({1, 2000}, std::vector<double>(tone));
  auto b = Tensor<double>::from_data({1, 2000}, std::vector<double>(tone));
  CHECK(binsight::metrics::multiscale_spectral_loss(a, b, w).item() ==
        doctest::Approx(0.0).epsilon(1e-12));

  auto silence = Tensor<double>::zeros({1, 2000});
  CHECK(binsight::metrics::multiscale_spectral_loss(a, silence, w).item() > 0.1);
}

TEST_CASE("s3r metrics: identity is zero, envelope is phase-blind") {
  binsight::dsp::StftParams p;
  binsight::dsp::Waveform left, right;
  left.sample_rate = right.sample_rate = 16000;
  left.samples.resize(4000);
  for (std::size_t i = 0; i < left.samples.size(); ++i)
    left.samples[i] = 0.3 * std::sin(2.0 * kPi * 330.0 * i / 16000.0);
  right.samples = left.samples;
  for (auto& v : right.samples) v *= 0.7;

  auto same = binsight::metrics::s3r_metrics(left, right, left, right, p);
  CHECK(same.mse[0] == 0.0);
  CHECK(same.mse[1] == 0.0);
  CHECK(same.env[0] == 0.0);
  CHECK(same.env[1] == 0.0);

  // ears are reported separately
  binsight::dsp::Waveform off = right;
  for (auto& v : off.samples) v *= 1.3;
  auto sep = binsight::metrics::s3r_metrics(left, off, left, right, p);
  CHECK(sep.mse[0] == 0.0);
  CHECK(sep.mse[1] > 0.0);
  CHECK(sep.env[1] > 0.0);

  // sign flip: spectrogram error positive, envelope error ~ 0
  binsight::dsp::Waveform neg = left;
  for (auto& v : neg.samples) v = -v;
  auto flip = binsight::metrics::s3r_metrics(neg, right, left, right, p);
  CHECK(flip.mse[0] > 0.0);
  CHECK(flip.env[0] == doctest::Approx(0.0).epsilon(1e-12));
}
