#include "dcdepth/optim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace dcdepth {

namespace {

// keeps sigmoid(logit) strictly inside (0, 1) in double precision
constexpr double kLogitLimit = 30.0;

}  // namespace

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamMoments& moments, int t, double learning_rate,
               const AdamConfig& config) {
  const std::size_t n = params.size();
  if (grads.size() != n || moments.m.size() != n || moments.v.size() != n) {
    throw std::invalid_argument("adam_step: size mismatch");
  }
  if (t < 1) throw std::invalid_argument("adam_step: step counter starts at 1");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i])) {
      std::ostringstream msg;
      msg << "adam_step: non-finite gradient " << grads[i] << " at index " << i;
      throw NumericalError(msg.str());
    }
  }
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    moments.m[i] = config.beta1 * moments.m[i] + (1.0 - config.beta1) * g;
    moments.v[i] = config.beta2 * moments.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = moments.m[i] / bias1;
    const double v_hat = moments.v[i] / bias2;
    params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

void OptimizeConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("optimize config: " + what);
  };
  if (iterations < 0) fail("iterations must be non-negative");
  if (scales < 1) fail("scales must be at least 1");
  if (!(learning_rate > 0.0)) fail("learning rate must be positive");
  if (!(field_lr_scale > 0.0)) fail("field learning-rate scale must be positive");
  if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0)) fail("beta1 must lie in (0, 1)");
  if (!(adam.beta2 > 0.0 && adam.beta2 < 1.0)) fail("beta2 must lie in (0, 1)");
  if (!(adam.epsilon > 0.0)) fail("epsilon must be positive");
  if (!(max_disparity > 0.0 && max_disparity <= 1.0)) fail("max disparity must lie in (0, 1]");
  double prev = 0.0;
  for (double b : schedule_breakpoints) {
    if (!(b > prev && b <= 1.0)) fail("schedule breakpoints must increase within (0, 1]");
    prev = b;
  }
  weights.validate();
}

double lr_schedule(int step, const OptimizeConfig& config) {
  if (step < 0) throw std::invalid_argument("lr_schedule: negative step");
  const double progress =
      config.iterations > 0 ? static_cast<double>(step) / config.iterations : 0.0;
  double lr = config.learning_rate;
  for (double b : config.schedule_breakpoints) {
    if (progress >= b) lr *= 0.5;
  }
  return lr;
}

SceneState initial_state(const ScenePyramid& pyr, int level, const OptimizeConfig& config) {
  const Intrinsics& K = pyr.intrinsics.at(static_cast<std::size_t>(level));
  SceneState state;
  state.params = SceneParams::constant(K.width, K.height, config.init_disparity_logit,
                                       config.init_mask_logit,
                                       Pose6(pyr.baseline, 0, 0, 0, 0, 0), Pose6(),
                                       config.max_disparity);
  state.scale_level = level;
  return state;
}

namespace {

void reset_moments(SceneState& state) {
  auto b = blocks(state.params);
  for (std::size_t k = 0; k < b.size(); ++k) state.moments[k] = AdamMoments(b[k].size());
}

void check_finite(const LossBreakdown& loss, int iteration) {
  const std::pair<const char*, double> terms[] = {
      {"image", loss.image},
      {"smooth", loss.smooth},
      {"consistency", loss.consistency},
      {"explainability", loss.explainability},
      {"total", loss.total}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "optimize_scene: non-finite " << name << " loss at iteration " << iteration;
      throw NumericalError(msg.str());
    }
  }
}

}  // namespace

OptimizeResult optimize_scene(const SceneSample& sample, const OptimizeConfig& config,
                              const std::function<void(const TraceRow&)>& on_step) {
  config.validate();
  const ScenePyramid pyr = ScenePyramid::build(sample, config.scales);

  OptimizeResult result;
  SceneState& state = result.state;
  state = initial_state(pyr, config.scales - 1, config);
  reset_moments(state);
  constexpr std::size_t kStereoBlock = 4;

  for (int level = config.scales - 1; level >= 0; --level) {
    if (level != state.scale_level) {
      const Intrinsics& K = pyr.intrinsics[static_cast<std::size_t>(level)];
      for (Image& f : state.params.disparity_logits) f = upsample_bilinear(f, K.width, K.height);
      state.params.mask_logits = upsample_bilinear(state.params.mask_logits, K.width, K.height);
      state.scale_level = level;
      reset_moments(state);
    }

    for (int step = 0; step < config.iterations; ++step) {
      const double lr = lr_schedule(step, config);
      SceneGradients grads;
      const LossBreakdown loss =
          total_loss(pyr, level, state.params, config.weights, &grads);
      check_finite(loss, state.step);

      TraceRow row{state.step, level, lr, loss};
      if (on_step) on_step(row);
      result.trace.push_back(std::move(row));

      auto params = blocks(state.params);
      const auto g = blocks(std::as_const(grads));
      for (std::size_t k = 0; k < params.size(); ++k) {
        if (k == kStereoBlock && config.freeze_stereo_pose) continue;
        const bool is_field = k < 4 || k == 6;
        try {
          adam_step(params[k], g[k], state.moments[k], step + 1,
                    is_field ? lr * config.field_lr_scale : lr, config.adam);
        } catch (const NumericalError& e) {
          std::ostringstream msg;
          msg << "optimize_scene: iteration " << state.step << ", block "
              << kBlockNames[k] << ": " << e.what();
          throw NumericalError(msg.str());
        }
        if (is_field) {
          for (double& x : params[k]) x = std::clamp(x, -kLogitLimit, kLogitLimit);
        }
      }
      ++state.step;
    }
  }
  return result;
}

double GradcheckReport::max_relative_error() const {
  double m = 0.0;
  for (const auto& b : blocks) m = std::max(m, b.relative_error);
  return m;
}

GradcheckReport gradcheck(const ScenePyramid& pyr, int base_level,
                          const SceneParams& params, const LossWeights& weights,
                          const GradcheckOptions& options) {
  SceneGradients analytic;
  const double f_center = total_loss(pyr, base_level, params, weights, &analytic).total;

  SceneParams probe = params;
  auto probe_blocks = blocks(probe);
  const auto analytic_blocks = blocks(std::as_const(analytic));

  GradcheckReport report;
  for (std::size_t k = 0; k < probe_blocks.size(); ++k) {
    const double sign = options.flip_sign_of_block == kBlockNames[k] ? -1.0 : 1.0;
    BlockError err;
    err.name = std::string(kBlockNames[k]);
    double max_numeric = 0.0;
    for (std::size_t i = 0; i < probe_blocks[k].size(); ++i) {
      double& x = probe_blocks[k][i];
      const double saved = x;
      double eps = options.eps;
      double numeric = 0.0;
      for (int attempt = 0; attempt <= options.max_step_reductions; ++attempt) {
        x = saved + eps;
        const double f_plus = total_loss(pyr, base_level, probe, weights).total;
        x = saved - eps;
        const double f_minus = total_loss(pyr, base_level, probe, weights).total;
        x = saved;
        numeric = (f_plus - f_minus) / (2.0 * eps);
        // a smooth probe has a second difference of order eps^2; a probe that
        // straddles a kink or a validity flip does not
        const double curvature = std::abs(f_plus - 2.0 * f_center + f_minus);
        if (curvature <= 1e-3 * std::abs(f_plus - f_minus) + 1e-13) break;
        if (attempt < options.max_step_reductions) {
          ++report.reduced_steps;
          eps *= 0.1;
        }
      }
      const double a = sign * analytic_blocks[k][i];
      err.max_abs_error = std::max(err.max_abs_error, std::abs(a - numeric));
      err.max_abs_gradient = std::max(err.max_abs_gradient, std::abs(a));
      max_numeric = std::max(max_numeric, std::abs(numeric));
    }
    const double scale = std::max(max_numeric, err.max_abs_gradient);
    err.relative_error = scale > 0.0 ? err.max_abs_error / scale : 0.0;
    report.blocks.push_back(err);
  }
  return report;
}

GradcheckScene random_gradcheck_scene(std::uint64_t seed, int width, int height, int levels) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  SceneSample sample;
  sample.intrinsics = {static_cast<double>(width), static_cast<double>(width),
                       (width - 1) * 0.5, (height - 1) * 0.5, width, height};
  sample.baseline = 0.5;
  // low-frequency sinusoids plus noise: textured but not white
  for (auto& img : sample.images) {
    img = Image(width, height, 3);
    const double fx = uniform(0.3, 1.2), fy = uniform(0.3, 1.2);
    const double ph = uniform(0.0, 6.28);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        for (int c = 0; c < 3; ++c) {
          const double base = 0.5 + 0.3 * std::sin(fx * x + fy * y + ph + c);
          img.at(x, y, c) = std::clamp(base + uniform(-0.15, 0.15), 0.0, 1.0);
        }
      }
    }
  }

  GradcheckScene scene;
  scene.pyramid = ScenePyramid::build(sample, levels);
  SceneParams& p = scene.params;
  p.max_disparity = 0.3;
  for (auto& field : p.disparity_logits) {
    field = Image(width, height, 1);
    for (double& v : field.data) v = uniform(-1.5, 0.5);
  }
  p.mask_logits = Image(width, height, 1);
  for (double& v : p.mask_logits.data) v = uniform(-1.0, 3.0);
  p.stereo = Pose6(sample.baseline + uniform(-0.05, 0.05), uniform(-0.02, 0.02),
                   uniform(-0.02, 0.02), uniform(-0.03, 0.03), uniform(-0.03, 0.03),
                   uniform(-0.03, 0.03));
  p.temporal = Pose6(uniform(-0.1, 0.1), uniform(-0.05, 0.05), uniform(0.0, 0.3),
                     uniform(-0.03, 0.03), uniform(-0.03, 0.03), uniform(-0.03, 0.03));
  return scene;
}

}  // namespace dcdepth
