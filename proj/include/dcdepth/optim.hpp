#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcdepth/losses.hpp"
#include "dcdepth/scene.hpp"

namespace dcdepth {

/// Learning rate of the reference training schedule.
inline constexpr double kReferenceLearningRate = 1e-4;

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;

  AdamMoments() = default;
  explicit AdamMoments(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// Raised when a loss or gradient stops being finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One bias-corrected Adam update at step `t` (1-based). On a non-finite
/// gradient nothing is modified and NumericalError names the offending index.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamMoments& moments, int t, double learning_rate,
               const AdamConfig& config);

struct OptimizeConfig {
  int iterations = 300;  ///< Adam steps per pyramid scale
  int scales = 4;
  double learning_rate = kReferenceLearningRate;
  /// Fractions of the per-scale iterations after which the rate halves.
  std::vector<double> schedule_breakpoints{0.6, 0.8};
  /// Step multiplier for the per-pixel fields (disparity and mask logits);
  /// poses step with the plain learning rate.
  double field_lr_scale = 500.0;
  AdamConfig adam;
  LossWeights weights;
  double max_disparity = 0.3;
  double init_disparity_logit = 0.0;
  double init_mask_logit = 3.0;
  /// Keep the stereo pose at the calibrated baseline. With a free stereo
  /// pose the metric scale of the depth maps is not observable.
  bool freeze_stereo_pose = true;
  std::uint64_t seed = 0;
  bool deterministic = true;

  /// Throws std::invalid_argument for out-of-range settings.
  void validate() const;
};

/// Learning rate for `step` (0-based) within a scale of `config.iterations`
/// steps: the base rate until the first breakpoint, halved at each further one.
double lr_schedule(int step, const OptimizeConfig& config);

/// Parameters plus the optimizer's bookkeeping.
struct SceneState {
  SceneParams params;
  std::array<AdamMoments, 7> moments;
  int step = 0;
  int scale_level = 0;  ///< pyramid level the parameters live on
};

struct TraceRow {
  int iteration = 0;  ///< global, counting across scales
  int scale = 0;      ///< pyramid level, 0 = full resolution
  double learning_rate = 0.0;
  LossBreakdown loss;
};

struct OptimizeResult {
  SceneState state;
  std::vector<TraceRow> trace;
};

/// Initial parameters for a scene at the given pyramid level.
SceneState initial_state(const ScenePyramid& pyr, int level, const OptimizeConfig& config);

/// Coarse-to-fine direct minimization of the total loss. Starts at the
/// coarsest level, runs `iterations` Adam steps per level, and bilinearly
/// upsamples the logit fields to seed the next finer level. The trace holds
/// the loss evaluated before every step.
///
/// Throws NumericalError with iteration and term on a non-finite loss.
OptimizeResult optimize_scene(const SceneSample& sample, const OptimizeConfig& config,
                              const std::function<void(const TraceRow&)>& on_step = {});

struct BlockError {
  std::string name;
  double max_abs_error = 0.0;
  double max_abs_gradient = 0.0;
  /// max |analytic - numeric| / max |numeric| over the block (0 when both
  /// vanish).
  double relative_error = 0.0;
};

struct GradcheckReport {
  std::vector<BlockError> blocks;
  int reduced_steps = 0;  ///< probes retried with a smaller step
  [[nodiscard]] double max_relative_error() const;
};

struct GradcheckOptions {
  double eps = 1e-6;
  /// A probe whose second difference shows it straddles a kink or a
  /// validity flip is retried with a step ten times smaller, at most this
  /// many times.
  int max_step_reductions = 2;
  /// Test hook: negate the analytic gradient of this block before comparing.
  std::string flip_sign_of_block;
};

/// Central finite differences of the total loss against the analytic
/// gradient, per parameter block.
GradcheckReport gradcheck(const ScenePyramid& pyr, int base_level,
                          const SceneParams& params, const LossWeights& weights,
                          const GradcheckOptions& options = {});

/// A small random scene for gradient checking: smooth random images,
/// random disparity and mask logits, small random poses.
struct GradcheckScene {
  ScenePyramid pyramid;
  SceneParams params;
};
GradcheckScene random_gradcheck_scene(std::uint64_t seed, int width = 8, int height = 8,
                                      int levels = 2);

}  // namespace dcdepth
