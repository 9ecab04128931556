#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dcdepth/evalkit.hpp"
#include "dcdepth/optim.hpp"
#include "support.hpp"

using namespace dcdepth;

namespace {

// Textbook per-pixel definitions, accumulated in long double.
struct OracleMetrics {
  double abs_rel, sq_rel, rmse, rmse_log, d1, d2, d3;
};

OracleMetrics oracle(const std::vector<double>& pred, const std::vector<double>& gt, double cap) {
  long double a = 0, s = 0, r = 0, l = 0;
  int c1 = 0, c2 = 0, c3 = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const long double p = std::min(std::max(pred[i], 1e-3), cap);
    const long double g = std::min(std::max(gt[i], 1e-3), cap);
    a += std::fabs(p - g) / g;
    s += (p - g) * (p - g) / g;
    r += (p - g) * (p - g);
    l += (std::log(p) - std::log(g)) * (std::log(p) - std::log(g));
    const long double t = p / g > g / p ? p / g : g / p;
    c1 += t < 1.25L;
    c2 += t < 1.5625L;
    c3 += t < 1.953125L;
  }
  const long double n = static_cast<long double>(gt.size());
  return {double(a / n), double(s / n), double(std::sqrt(r / n)), double(std::sqrt(l / n)),
          c1 / double(n), c2 / double(n), c3 / double(n)};
}

Image column(const std::vector<double>& v) {
  Image img(static_cast<int>(v.size()), 1, 1);
  img.data = v;
  return img;
}

}  // namespace

TEST(Metrics, PerfectPrediction) {
  std::mt19937_64 rng(1);
  const Image gt = testutil::random_image(rng, 10, 6, 1, 1.0, 60.0);
  const MetricReport r = eigen_metrics(gt, gt, ValidityMask(gt.pixels(), 1));
  EXPECT_EQ(r.abs_rel, 0.0);
  EXPECT_EQ(r.sq_rel, 0.0);
  EXPECT_EQ(r.rmse, 0.0);
  EXPECT_EQ(r.rmse_log, 0.0);
  EXPECT_EQ(r.delta1, 1.0);
  EXPECT_EQ(r.delta3, 1.0);
  EXPECT_EQ(r.valid_count, gt.pixels());
}

TEST(Metrics, DoubledPrediction) {
  std::mt19937_64 rng(2);
  const Image gt = testutil::random_image(rng, 10, 6, 1, 1.0, 40.0);
  Image pred = gt;
  for (double& v : pred.data) v *= 2;
  const MetricReport r = eigen_metrics(pred, gt, ValidityMask(gt.pixels(), 1));
  EXPECT_NEAR(r.abs_rel, 1.0, 1e-12);
  EXPECT_NEAR(r.rmse_log, std::log(2.0), 1e-12);
  EXPECT_EQ(r.delta1, 0.0);
  EXPECT_EQ(r.delta2, 0.0);
  EXPECT_EQ(r.delta3, 0.0);
}

TEST(Metrics, MatchesScalarOracleOnRandomInstances) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> depth(0.0005, 100.0);
  std::uniform_int_distribution<int> size(1, 200);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = size(rng);
    const double cap = trial % 2 ? 50.0 : 80.0;
    std::vector<double> p(n), g(n), pv, gv;
    ValidityMask valid(n);
    for (int i = 0; i < n; ++i) {
      p[i] = depth(rng);
      g[i] = depth(rng);
      valid[i] = i == 0 || rng() % 4 != 0;
      if (valid[i]) {
        pv.push_back(p[i]);
        gv.push_back(g[i]);
      }
    }
    const MetricReport r = eigen_metrics(column(p), column(g), valid, cap);
    const OracleMetrics o = oracle(pv, gv, cap);
    EXPECT_NEAR(r.abs_rel, o.abs_rel, 1e-10 * std::max(1.0, o.abs_rel));
    EXPECT_NEAR(r.sq_rel, o.sq_rel, 1e-10 * std::max(1.0, o.sq_rel));
    EXPECT_NEAR(r.rmse, o.rmse, 1e-10 * std::max(1.0, o.rmse));
    EXPECT_NEAR(r.rmse_log, o.rmse_log, 1e-10 * std::max(1.0, o.rmse_log));
    EXPECT_NEAR(r.delta1, o.d1, 1e-12);
    EXPECT_NEAR(r.delta2, o.d2, 1e-12);
    EXPECT_NEAR(r.delta3, o.d3, 1e-12);
    EXPECT_EQ(r.valid_count, pv.size());
  }
}

TEST(Metrics, ScaleInvariantTermsUnderCommonScaling) {
  std::mt19937_64 rng(4);
  const Image gt = testutil::random_image(rng, 8, 8, 1, 1.0, 10.0);
  const Image pred = testutil::random_image(rng, 8, 8, 1, 1.0, 10.0);
  Image gt3 = gt, pred3 = pred;
  for (double& v : gt3.data) v *= 3;
  for (double& v : pred3.data) v *= 3;
  const ValidityMask valid(gt.pixels(), 1);
  const MetricReport a = eigen_metrics(pred, gt, valid);
  const MetricReport b = eigen_metrics(pred3, gt3, valid);
  EXPECT_NEAR(a.abs_rel, b.abs_rel, 1e-12);
  EXPECT_NEAR(a.rmse_log, b.rmse_log, 1e-12);
  EXPECT_NEAR(3 * a.rmse, b.rmse, 1e-12);
  EXPECT_NEAR(3 * a.sq_rel, b.sq_rel, 1e-12);
  EXPECT_EQ(a.delta1, b.delta1);
}

TEST(Metrics, CapClampsPredictionsAndGroundTruth) {
  const Image gt = column({60.0, 10.0});
  const Image pred = column({70.0, 10.0});
  const ValidityMask valid{1, 1};
  EXPECT_EQ(eigen_metrics(pred, gt, valid, 50.0).abs_rel, 0.0);
  EXPECT_GT(eigen_metrics(pred, gt, valid, 80.0).abs_rel, 0.0);
  EXPECT_TRUE(std::isfinite(eigen_metrics(column({0.0}), column({5.0}), {1}).rmse_log));
}

TEST(Metrics, NoValidPixelsIsAnError) {
  const Image gt = column({1.0, 2.0});
  EXPECT_THROW(eigen_metrics(gt, gt, {0, 0}), std::invalid_argument);
  EXPECT_THROW(eigen_metrics(gt, column({1.0}), {1}), std::invalid_argument);
}

TEST(Metrics, ReportFormats) {
  MetricReport r;
  r.abs_rel = 0.5;
  EXPECT_NE(r.to_key_value().find("abs_rel=0.5\n"), std::string::npos);
  EXPECT_EQ(r.to_key_value().find("d1_all"), std::string::npos);
  r.d1_all = 12.5;
  EXPECT_NE(r.to_key_value().find("d1_all=12.5\n"), std::string::npos);
  const std::string row = r.to_csv_row(), header = MetricReport::csv_header();
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(header.begin(), header.end(), ','));
  EXPECT_NE(row.find(",12.5,"), std::string::npos);
}

TEST(D1All, OutlierNeedsBothThresholds) {
  EXPECT_EQ(d1_all(column({50.0}), column({54.0}), {1}), 100.0);
  EXPECT_EQ(d1_all(column({100.0}), column({104.0}), {1}), 0.0);
  EXPECT_EQ(d1_all(column({50.0}), column({60.0}), {1}), 100.0);
  EXPECT_EQ(d1_all(column({1.0}), column({3.5}), {1}), 0.0);
  EXPECT_EQ(d1_all(column({0.0}), column({3.5}), {1}), 100.0);
  EXPECT_EQ(d1_all(column({50.0, 0.0, 7.0}), column({60.0, 1.0, 7.0}), {1, 0, 1}), 50.0);
}

TEST(D1All, InvariantUnderPixelPermutation) {
  std::mt19937_64 rng(5);
  std::vector<double> p(64), g(64);
  std::uniform_real_distribution<double> d(1.0, 80.0);
  for (int i = 0; i < 64; ++i) {
    g[i] = d(rng);
    p[i] = g[i] + (rng() % 2 ? 10.0 : 1.0);
  }
  const double before = d1_all(column(p), column(g), ValidityMask(64, 1));
  std::vector<int> perm(64);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> pp(64), gp(64);
  for (int i = 0; i < 64; ++i) {
    pp[i] = p[perm[i]];
    gp[i] = g[perm[i]];
  }
  EXPECT_EQ(before, d1_all(column(pp), column(gp), ValidityMask(64, 1)));
}

TEST(FlipMerge, WeightsFormAPartitionOfUnity) {
  for (int w : {1, 7, 20, 256, 1242}) {
    for (int x = 0; x < w; ++x) {
      const double a = flip_merge_weight(x, w);
      ASSERT_GE(a, 0.0);
      ASSERT_LE(a, 1.0);
      ASSERT_NEAR(a + (1.0 - a), 1.0, 1e-12);
    }
  }
  EXPECT_THROW(flip_merge_weight(5, 5), std::out_of_range);
}

TEST(FlipMerge, WeightProfile) {
  const int w = 200;
  EXPECT_EQ(flip_merge_weight(0, w), 1.0);
  EXPECT_EQ(flip_merge_weight(w - 1, w), 0.0);
  EXPECT_NEAR(flip_merge_weight(5, w), 0.75, 1e-12);
  EXPECT_EQ(flip_merge_weight(100, w), 0.5);
  for (int x = 0; x < 10; ++x) EXPECT_GE(flip_merge_weight(x, w), 0.5);
  for (int x = w - 10; x < w; ++x) EXPECT_LE(flip_merge_weight(x, w), 0.5);
}

TEST(FlipMerge, IdenticalInputsPassThrough) {
  std::mt19937_64 rng(6);
  const Image d = testutil::random_image(rng, 40, 5, 1, 0.0, 0.3);
  EXPECT_EQ(flip_merge(d, d).data, d.data);
}

TEST(FlipMerge, EdgesExactMiddleIsMeanAndOutputBounded) {
  std::mt19937_64 rng(7);
  const int w = 40;
  const Image u = testutil::random_image(rng, w, 5, 1, 0.0, 0.3);
  const Image f = testutil::random_image(rng, w, 5, 1, 0.0, 0.3);
  const Image m = flip_merge(u, f);
  for (int y = 0; y < 5; ++y) {
    EXPECT_EQ(m.at(0, y), f.at(0, y));
    EXPECT_EQ(m.at(w - 1, y), u.at(w - 1, y));
    EXPECT_NEAR(m.at(w / 2, y), 0.5 * (u.at(w / 2, y) + f.at(w / 2, y)), 1e-15);
    for (int x = 0; x < w; ++x) {
      EXPECT_GE(m.at(x, y), std::min(u.at(x, y), f.at(x, y)));
      EXPECT_LE(m.at(x, y), std::max(u.at(x, y), f.at(x, y)));
    }
  }
  EXPECT_THROW(flip_merge(u, Image(w, 4, 1)), std::invalid_argument);
}

TEST(EvalMap, SelectsRightByDefaultAndLeftOnRequest) {
  SceneState state;
  state.params = SceneParams::constant(6, 4, 0.0, 0.0, Pose6(), Pose6(), 0.3);
  state.params.disparity_logits[idx(View::kLeft)] = Image(6, 4, 1, 30.0);
  state.params.disparity_logits[idx(View::kRight)] = Image(6, 4, 1, 0.0);
  for (double v : select_eval_map(state).data) EXPECT_EQ(v, 0.15);
  for (double v : select_eval_map(state, EvalView::kLeft).data) EXPECT_NEAR(v, 0.3, 1e-12);
}
