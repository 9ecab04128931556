#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <limits>

#include "dcdepth/dataio.hpp"
#include "dcdepth/optim.hpp"
#include "support.hpp"

using namespace dcdepth;

TEST(Adam, TwoStepsMatchHandComputation) {
  std::vector<double> x{1.0, -2.0};
  AdamMoments m(2);
  const AdamConfig cfg;
  const double lr = 0.1;
  const std::vector<double> g1{0.5, -4.0}, g2{-0.25, 1.0};

  adam_step(x, g1, m, 1, lr, cfg);
  adam_step(x, g2, m, 2, lr, cfg);

  for (int i = 0; i < 2; ++i) {
    double p = i == 0 ? 1.0 : -2.0, mm = 0, vv = 0;
    const double gs[2] = {g1[static_cast<std::size_t>(i)], g2[static_cast<std::size_t>(i)]};
    for (int t = 1; t <= 2; ++t) {
      const double g = gs[t - 1];
      mm = 0.9 * mm + 0.1 * g;
      vv = 0.999 * vv + 0.001 * g * g;
      const double mh = mm / (1 - std::pow(0.9, t)), vh = vv / (1 - std::pow(0.999, t));
      p -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
    EXPECT_NEAR(x[static_cast<std::size_t>(i)], p, 1e-15);
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> x{0.0};
  AdamMoments m(1);
  adam_step(x, std::vector<double>{123.0}, m, 1, 1e-4, AdamConfig{});
  EXPECT_NEAR(x[0], -1e-4, 1e-14);
}

TEST(Adam, NonFiniteGradientLeavesStateUntouched) {
  std::vector<double> x{1.0, 2.0, 3.0};
  AdamMoments m(3);
  m.m = {0.1, 0.2, 0.3};
  m.v = {0.01, 0.02, 0.03};
  const auto x0 = x;
  const auto m0 = m.m, v0 = m.v;
  for (double bad : {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity()}) {
    const std::vector<double> g{0.5, bad, 0.5};
    EXPECT_THROW(adam_step(x, g, m, 3, 1e-3, AdamConfig{}), NumericalError);
    EXPECT_EQ(x, x0);
    EXPECT_EQ(m.m, m0);
    EXPECT_EQ(m.v, v0);
  }
}

TEST(Schedule, ConstantThenHalving) {
  OptimizeConfig cfg;
  cfg.iterations = 300;
  for (int s = 0; s < 180; ++s) ASSERT_DOUBLE_EQ(lr_schedule(s, cfg), 1e-4) << s;
  for (int s = 180; s < 240; ++s) ASSERT_DOUBLE_EQ(lr_schedule(s, cfg), 5e-5) << s;
  for (int s = 240; s < 300; ++s) ASSERT_DOUBLE_EQ(lr_schedule(s, cfg), 2.5e-5) << s;
}

TEST(Schedule, ScalesWithIterationCount) {
  OptimizeConfig cfg;
  cfg.iterations = 50;
  EXPECT_DOUBLE_EQ(lr_schedule(29, cfg), 1e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(30, cfg), 5e-5);
  EXPECT_DOUBLE_EQ(lr_schedule(40, cfg), 2.5e-5);
  EXPECT_THROW(lr_schedule(-1, cfg), std::invalid_argument);
}

TEST(OptimizeConfig, RejectsOutOfRangeSettings) {
  OptimizeConfig cfg;
  cfg.scales = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = OptimizeConfig{};
  cfg.adam.beta1 = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = OptimizeConfig{};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = OptimizeConfig{};
  cfg.schedule_breakpoints = {0.8, 0.6};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

namespace {

SceneSample small_plane_scene() {
  SceneSpec spec = SceneSpec::fronto_parallel();
  spec.intrinsics = {75.0, 75.0, 63.5, 31.5, 128, 64};
  return synth_scene(spec);
}

}  // namespace

TEST(Optimize, ZeroIterationsReturnsInitialization) {
  const SceneSample s = small_plane_scene();
  OptimizeConfig cfg;
  cfg.iterations = 0;
  const OptimizeResult r = optimize_scene(s, cfg);
  EXPECT_TRUE(r.trace.empty());
  const SceneParams& p = r.state.params;
  EXPECT_EQ(p.width(), 128);
  for (const Image& f : p.disparity_logits)
    for (double v : f.data) ASSERT_EQ(v, 0.0);
  for (double v : p.mask_logits.data) ASSERT_EQ(v, 3.0);
  EXPECT_EQ(p.stereo, Pose6(s.baseline, 0, 0, 0, 0, 0));
  EXPECT_EQ(p.temporal, Pose6());
}

TEST(Optimize, TraceDecreasesWithinScalesAndFieldsStayInRange) {
  const SceneSample s = synth_scene(SceneSpec::fronto_parallel());
  OptimizeConfig cfg;
  cfg.iterations = 300;
  const OptimizeResult r = optimize_scene(s, cfg);
  ASSERT_EQ(r.trace.size(), 1200u);
  // Adam oscillates from step to step, so 50-iteration window means are
  // compared. Every scale change switches to a new objective (one more
  // pyramid level, upsampled fields, fresh moments), so the warm-up restarts
  // per scale.
  auto window_mean = [&](std::size_t begin) {
    double sum = 0.0;
    for (std::size_t k = begin; k < begin + 50; ++k) sum += r.trace[k].loss.total;
    return sum / 50.0;
  };
  for (std::size_t scale = 0; scale < 4; ++scale) {
    for (std::size_t i = 100; i + 100 <= 300; ++i) {
      const std::size_t at = scale * 300 + i;
      ASSERT_EQ(r.trace[at].scale, r.trace[at + 99].scale);
      ASSERT_LE(window_mean(at + 50), window_mean(at)) << "iteration " << at;
    }
  }
  const SceneParams& p = r.state.params;
  for (const Image& f : p.disparity_logits) {
    const Image d = normalized_disparity(f, p.max_disparity);
    for (double v : d.data) {
      ASSERT_GT(v, 0.0);
      ASSERT_LT(v, p.max_disparity);
      const double z = disparity_to_depth(v, s.intrinsics, s.baseline);
      ASSERT_TRUE(std::isfinite(z));
      ASSERT_GT(z, 0.0);
    }
  }
  EXPECT_EQ(p.stereo, Pose6(s.baseline, 0, 0, 0, 0, 0));
}

TEST(Optimize, FreeStereoPoseIsUpdated) {
  const SceneSample s = small_plane_scene();
  OptimizeConfig cfg;
  cfg.iterations = 5;
  cfg.scales = 2;
  cfg.freeze_stereo_pose = false;
  const OptimizeResult r = optimize_scene(s, cfg);
  EXPECT_NE(r.state.params.stereo, Pose6(s.baseline, 0, 0, 0, 0, 0));
}

TEST(Gradcheck, TwentySeedsPassQuickly) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const GradcheckScene s = random_gradcheck_scene(seed);
    const GradcheckReport r = gradcheck(s.pyramid, 0, s.params, LossWeights{});
    ASSERT_EQ(r.blocks.size(), 7u);
    for (const BlockError& b : r.blocks) EXPECT_LT(b.relative_error, 1e-4) << "seed " << seed << " " << b.name;
    worst = std::max(worst, r.max_relative_error());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 60.0);
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(Gradcheck, DetectsInjectedSignFlipInEveryBlock) {
  const GradcheckScene s = random_gradcheck_scene(1);
  for (std::string_view name : kBlockNames) {
    GradcheckOptions o;
    o.flip_sign_of_block = std::string(name);
    const GradcheckReport r = gradcheck(s.pyramid, 0, s.params, LossWeights{}, o);
    for (const BlockError& b : r.blocks) {
      if (b.name == name) {
        EXPECT_GT(b.relative_error, 1.0) << name;
      } else {
        EXPECT_LT(b.relative_error, 1e-4) << name;
      }
    }
  }
}

// Truncation error shrinks with eps and rounding error grows as 1/eps, so
// the error curve is a valley in log-eps. The loss is only piecewise smooth
// (bilinear cells, absolute values, validity borders): steps of 1e-4 and up
// already straddle kinks, so the sweep spans both sides of the valley.
TEST(Gradcheck, ErrorCurveIsConvexInLogEps) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GradcheckScene s = random_gradcheck_scene(seed);
    auto log_error = [&](double eps) {
      GradcheckOptions o;
      o.eps = eps;
      o.max_step_reductions = 0;
      return std::log10(gradcheck(s.pyramid, 0, s.params, LossWeights{}, o).max_relative_error());
    };
    const double coarse = log_error(1e-3), mid = log_error(1e-6), fine = log_error(1e-9);
    EXPECT_LT(mid, 0.5 * (coarse + fine)) << "seed " << seed;
    EXPECT_GT(fine - log_error(1e-7), 1.0) << "seed " << seed;
  }
}

TEST(Gradcheck, ZeroWeightsGiveZeroError) {
  const GradcheckScene s = random_gradcheck_scene(2);
  LossWeights w;
  w.image = w.smooth = w.consistency = w.explainability = 0.0;
  EXPECT_EQ(gradcheck(s.pyramid, 0, s.params, w).max_relative_error(), 0.0);
}
