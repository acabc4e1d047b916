#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "neurotube/error.hpp"
#include "neurotube/gradcheck.hpp"
#include "neurotube/losses.hpp"
#include "neurotube/metrics.hpp"
#include "neurotube/ops.hpp"

using namespace neurotube;

namespace {

Volume binary_volume(Dims3 d, std::mt19937_64& gen, double p) {
  std::bernoulli_distribution b(p);
  Volume v(d, 0.0f, VolumeKind::mask);
  for (auto& x : v.data) x = b(gen) ? 1.0f : 0.0f;
  return v;
}

Volume uniform_volume(Dims3 d, std::mt19937_64& gen) {
  std::uniform_real_distribution<float> u(0, 1);
  Volume v(d, 0.0f, VolumeKind::prediction);
  for (auto& x : v.data) x = u(gen);
  return v;
}

struct Counts {
  double tp = 0, fp = 0, fn = 0, tn = 0;
};

Counts count(const Volume& pred, const Volume& truth, double t) {
  Counts c;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] >= t, y = truth.data[i] == 1.0f;
    c.tp += p && y;
    c.fp += p && !y;
    c.fn += !p && y;
    c.tn += !p && !y;
  }
  return c;
}

double ratio(double a, double b) { return b == 0 ? 0 : a / b; }

// Independent sweep: direct confusion counts, then trapezoids over points
// ordered by x (ties contribute no area, so their order is irrelevant).
struct Oracle {
  std::vector<double> precision, recall, f1, fpr;
  double pr_auc = 0, roc_auc = 0, top_f1 = 0;
};

double trapezoid(std::vector<std::pair<double, double>> pts) {
  std::stable_sort(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.first < b.first; });
  double area = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2;
  return area;
}

Oracle brute_force(const Volume& pred, const Volume& truth) {
  Oracle o;
  std::vector<std::pair<double, double>> pr, roc;
  for (int k = 0; k <= 20; ++k) {
    const double t = k / 20.0;
    const Counts c = count(pred, truth, t);
    const double p = ratio(c.tp, c.tp + c.fp), r = ratio(c.tp, c.tp + c.fn);
    const double f = ratio(2 * p * r, p + r);
    o.precision.push_back(p);
    o.recall.push_back(r);
    o.f1.push_back(f);
    o.fpr.push_back(ratio(c.fp, c.fp + c.tn));
    o.top_f1 = std::max(o.top_f1, f);
    pr.push_back({r, p});
    roc.push_back({o.fpr.back(), r});
  }
  o.pr_auc = trapezoid(pr);
  o.roc_auc = trapezoid(roc);
  return o;
}

}  // namespace

TEST_SUITE("information weight") {
  TEST_CASE("examples") {
    CHECK(losses::information_weight(0.0, 10.0) == 0.0);
    CHECK(losses::information_weight(10.0, 10.0) == 1.0);
    CHECK(losses::information_weight(32 * 0.5, 64 * 0.5) == 0.5);
  }

  TEST_CASE("clamped and validated") {
    CHECK(losses::information_weight(20.0, 10.0) == 1.0);
    CHECK_THROWS_AS(losses::information_weight(1.0, 0.0), ArgumentError);
    CHECK_THROWS_AS(losses::information_weight(1.0, -2.0), ArgumentError);
  }
}

TEST_SUITE("weighted cross-entropy") {
  const std::vector<real> label{0, 0, 1, 0, 0, 0, 0, 0, 0, 0};

  TEST_CASE("uniform prediction") {
    const Tensor p({10}, real(0.1));
    CHECK(std::abs(losses::weighted_cross_entropy(label, p, 1.0).item() - std::log(10.0)) < 1e-6);
  }

  TEST_CASE("certain and correct") {
    std::vector<real> v(10, 0);
    v[2] = 1;
    CHECK(losses::weighted_cross_entropy(label, Tensor({10}, v), 1.0).item() == 0.0f);
  }

  TEST_CASE("zero weight") {
    std::mt19937_64 gen(2);
    std::vector<real> v(10);
    for (auto& x : v) x = real(std::uniform_real_distribution<double>(0.01, 1)(gen));
    CHECK(losses::weighted_cross_entropy(label, Tensor({10}, v), 0.0).item() == 0.0f);
  }

  TEST_CASE("linear in the weight") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 100; ++t) {
      std::vector<real> v(10);
      for (auto& x : v) x = real(u(gen) + 0.01);
      const double w = u(gen);
      const double one = losses::weighted_cross_entropy_value(label, v, 1.0);
      CHECK(std::abs(losses::weighted_cross_entropy_value(label, v, w) - w * one) < 1e-7);
    }
  }

  TEST_CASE("length mismatch") {
    CHECK_THROWS_AS(losses::weighted_cross_entropy(label, Tensor({9}, real(0.1)), 1.0), ArgumentError);
  }

  TEST_CASE("gradient through the softmax") {
    std::mt19937_64 gen(5);
    std::vector<real> logits(10);
    for (auto& x : logits) x = real(std::uniform_real_distribution<double>(-2, 2)(gen));
    Tensor z({10}, logits);
    const auto r = grad_check(
        [&] { return losses::weighted_cross_entropy(label, ops::softmax(z), 0.7); }, {z});
    CHECK(r.max_rel_error < 1e-3);
  }
}

TEST_SUITE("binary cross-entropy") {
  TEST_CASE("closed forms") {
    const std::vector<float> t{1, 0, 1, 1};
    CHECK(losses::binary_cross_entropy(Tensor({4}, real(0.5)), t).item() ==
          doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(losses::binary_cross_entropy(Tensor({2}, std::vector<real>{0.9f, 0.2f}),
                                       std::vector<float>{1, 0})
              .item() == doctest::Approx(0.164252).epsilon(1e-5));
  }

  TEST_CASE("exact prediction stays under the clamp floor") {
    const std::vector<float> t{1, 0, 0, 1};
    const Tensor p({4}, std::vector<real>{1, 0, 0, 1});
    CHECK(losses::binary_cross_entropy(p, t).item() <= 1e-6f);
    CHECK(losses::binary_cross_entropy_value(std::vector<float>{1, 0, 0, 1}, t) <= 1e-6);
  }

  TEST_CASE("minimum only at the target") {
    const std::vector<float> t{1, 0};
    const double at_target = losses::binary_cross_entropy_value(std::vector<float>{1, 0}, t);
    for (float e : {0.5f, 0.1f, 0.01f})
      CHECK(losses::binary_cross_entropy_value(std::vector<float>{1 - e, e}, t) > at_target);
  }

  TEST_CASE("shape mismatch") {
    CHECK_THROWS_AS(losses::binary_cross_entropy(Tensor({3}), std::vector<float>{1, 0}), ArgumentError);
  }
}

TEST_SUITE("threshold metrics") {
  TEST_CASE("perfect prediction") {
    std::mt19937_64 gen(1);
    Volume truth = binary_volume({6, 6, 6}, gen, 0.2);
    Volume pred = truth;
    pred.kind = VolumeKind::prediction;
    const auto m = threshold_metrics(pred, truth, 0.5);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
  }

  TEST_CASE("empty prediction") {
    Volume truth({4, 1, 1}, 0.0f, VolumeKind::mask);
    truth.data[1] = 1;
    const auto m = threshold_metrics(Volume({4, 1, 1}, 0.0f, VolumeKind::prediction), truth, 0.5);
    CHECK(m.precision == 0.0);
    CHECK(m.recall == 0.0);
    CHECK(m.f1 == 0.0);
  }

  TEST_CASE("TP=2, FP=1, FN=1") {
    Volume truth({5, 1, 1}, 0.0f, VolumeKind::mask), pred({5, 1, 1}, 0.0f, VolumeKind::prediction);
    truth.data = {1, 1, 1, 0, 0};
    pred.data = {0.9f, 0.8f, 0.1f, 0.7f, 0.2f};
    const auto m = threshold_metrics(pred, truth, 0.5);
    CHECK(m.precision == doctest::Approx(2.0 / 3));
    CHECK(m.recall == doctest::Approx(2.0 / 3));
    CHECK(m.f1 == doctest::Approx(2.0 / 3));
  }

  TEST_CASE("shape mismatch") {
    CHECK_THROWS_AS(threshold_metrics(Volume({2, 2, 2}), Volume({2, 2, 1}), 0.5), ArgumentError);
    CHECK_THROWS_AS(curve_summary(Volume({2, 2, 2}), Volume({2, 2, 1})), ArgumentError);
  }
}

TEST_SUITE("curve summary") {
  TEST_CASE("21 thresholds") {
    const auto t = sweep_thresholds();
    REQUIRE(t.size() == 21);
    for (int k = 0; k <= 20; ++k) CHECK(t[k] == doctest::Approx(0.05 * k).epsilon(1e-12));
  }

  TEST_CASE("perfect binary prediction") {
    std::mt19937_64 gen(2);
    Volume truth = binary_volume({8, 8, 8}, gen, 0.1);
    Volume pred = truth;
    pred.kind = VolumeKind::prediction;
    const auto r = curve_summary(pred, truth);
    CHECK(r.top_f1 == 1.0);
    CHECK(r.f1.size() == 21);
    // Every sweep point sits at recall 1, so the unanchored PR area is zero.
    CHECK(r.auc == 0.0);
  }

  TEST_CASE("matches a brute-force sweep on random volumes") {
    std::mt19937_64 gen(7);
    for (int t = 0; t < 20; ++t) {
      const Volume truth = binary_volume({16, 16, 16}, gen, 0.1 + 0.02 * t);
      const Volume pred = uniform_volume({16, 16, 16}, gen);
      const Oracle o = brute_force(pred, truth);
      const auto pr = curve_summary(pred, truth, AucMode::precision_recall);
      const auto roc = curve_summary(pred, truth, AucMode::roc);
      CHECK(std::abs(pr.auc - o.pr_auc) < 1e-9);
      CHECK(std::abs(roc.auc - o.roc_auc) < 1e-9);
      CHECK(std::abs(pr.top_f1 - o.top_f1) < 1e-9);
      for (int k = 0; k <= 20; ++k) {
        CHECK(std::abs(pr.precision[k] - o.precision[k]) < 1e-9);
        CHECK(std::abs(pr.recall[k] - o.recall[k]) < 1e-9);
        CHECK(std::abs(pr.f1[k] - o.f1[k]) < 1e-9);
        CHECK(std::abs(roc.fpr[k] - o.fpr[k]) < 1e-9);
      }
    }
  }

  TEST_CASE("top F1 is the sweep maximum and F1 obeys the harmonic-mean bound") {
    std::mt19937_64 gen(8);
    const Volume truth = binary_volume({10, 10, 10}, gen, 0.3);
    Volume pred = uniform_volume({10, 10, 10}, gen);
    for (std::size_t i = 0; i < pred.data.size(); ++i)
      pred.data[i] = 0.5f * pred.data[i] + 0.5f * truth.data[i];
    const auto r = curve_summary(pred, truth);
    CHECK(r.top_f1 == *std::max_element(r.f1.begin(), r.f1.end()));
    const auto at = std::find(r.f1.begin(), r.f1.end(), r.top_f1) - r.f1.begin();
    CHECK(r.top_f1_threshold == r.thresholds[at]);
    for (std::size_t k = 0; k < 21; ++k) {
      if (r.precision[k] == 0 || r.recall[k] == 0) continue;
      CHECK(r.f1[k] >= std::min(r.precision[k], r.recall[k]) - 1e-12);
      CHECK(r.f1[k] <= std::max(r.precision[k], r.recall[k]) + 1e-12);
    }
    for (double v : r.f1) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }

  TEST_CASE("invariant under bin-preserving monotone relabeling") {
    std::mt19937_64 gen(9);
    std::uniform_int_distribution<int> bin(0, 20);
    std::uniform_real_distribution<double> off(0.005, 0.045);
    const Volume truth = binary_volume({12, 12, 12}, gen, 0.25);
    Volume pred({12, 12, 12}, 0.0f, VolumeKind::prediction), relabeled = pred;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
      const int k = std::min(bin(gen), 19);
      const double u = off(gen);
      pred.data[i] = float(0.05 * k + u);
      // Strictly increasing within [0.05k, 0.05(k+1)), fixing both ends.
      const double s = (u - 0.005) / 0.04;
      relabeled.data[i] = float(0.05 * k + 0.005 + 0.04 * s * s * s);
    }
    for (auto mode : {AucMode::precision_recall, AucMode::roc}) {
      const auto a = curve_summary(pred, truth, mode), b = curve_summary(relabeled, truth, mode);
      CHECK(a.auc == b.auc);
      CHECK(a.top_f1 == b.top_f1);
    }
  }

  TEST_CASE("trapezoid helper") {
    CHECK(trapezoid_auc({0, 1}, {1, 1}) == 1.0);
    CHECK(trapezoid_auc({1, 0, 0.5}, {0, 1, 0.5}) == doctest::Approx(0.5));
  }

  TEST_CASE("report lists every threshold") {
    std::mt19937_64 gen(4);
    const Volume truth = binary_volume({6, 6, 6}, gen, 0.3);
    const std::string text = format_report(curve_summary(uniform_volume({6, 6, 6}, gen), truth));
    CHECK(text.find("top_f1") != std::string::npos);
    CHECK(text.find("auc") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') >= 21);
  }
}
