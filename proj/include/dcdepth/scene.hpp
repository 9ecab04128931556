#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dcdepth/geometry.hpp"
#include "dcdepth/image.hpp"

namespace dcdepth {

/// The four views of a training sample: stereo pair at time t and t+1.
enum class View : int { kLeft = 0, kRight = 1, kNextLeft = 2, kNextRight = 3 };

inline constexpr std::array<View, 4> kAllViews{View::kLeft, View::kRight,
                                               View::kNextLeft, View::kNextRight};
/// Views reconstructed from the left image, in loss-term order.
inline constexpr std::array<View, 3> kTargetViews{View::kRight, View::kNextLeft,
                                                  View::kNextRight};

constexpr int idx(View v) { return static_cast<int>(v); }
std::string_view view_name(View v);

struct GroundTruth {
  std::array<Image, 4> depth;  ///< metric depth per view, 0 where unknown
  Pose6 stereo;                ///< right camera in the left camera frame
  Pose6 temporal;              ///< next left camera in the left camera frame
};

/// Stereo image quadruple with calibration.
struct SceneSample {
  std::array<Image, 4> images;
  Intrinsics intrinsics;
  double baseline = 0.0;
  std::optional<GroundTruth> ground_truth;

  const Image& image(View v) const { return images[static_cast<std::size_t>(idx(v))]; }

  /// Throws std::invalid_argument when images disagree with the intrinsics
  /// or the baseline is not positive.
  void validate() const;
};

/// Box-filtered image pyramid of a sample; level 0 is full resolution.
struct ScenePyramid {
  std::vector<std::array<Image, 4>> images;
  std::vector<Intrinsics> intrinsics;
  double baseline = 0.0;

  static ScenePyramid build(const SceneSample& sample, int levels);
  [[nodiscard]] int levels() const { return static_cast<int>(images.size()); }
};

/// Optimized quantities. Disparity fields are stored as unconstrained logits;
/// the normalized disparity (fraction of image width) is
/// sigmoid(logit) * max_disparity.
struct SceneParams {
  std::array<Image, 4> disparity_logits;
  Pose6 stereo;
  Pose6 temporal;
  Image mask_logits;
  double max_disparity = 0.3;

  [[nodiscard]] int width() const { return mask_logits.width; }
  [[nodiscard]] int height() const { return mask_logits.height; }

  /// Constant-initialized parameters of the given size.
  static SceneParams constant(int width, int height, double disparity_logit,
                              double mask_logit, const Pose6& stereo,
                              const Pose6& temporal, double max_disparity = 0.3);
};

/// Gradient of a scalar objective w.r.t. every SceneParams block.
struct SceneGradients {
  std::array<Image, 4> disparity_logits;
  Pose6 stereo;
  Pose6 temporal;
  Image mask_logits;

  static SceneGradients zeros_like(const SceneParams& params);
};

inline constexpr std::array<std::string_view, 7> kBlockNames{
    "disparity_l", "disparity_r",   "disparity_l1", "disparity_r1",
    "stereo_pose", "temporal_pose", "mask"};

/// Mutable views of the seven parameter blocks in kBlockNames order.
std::array<std::span<double>, 7> blocks(SceneParams& params);
std::array<std::span<double>, 7> blocks(SceneGradients& grads);
std::array<std::span<const double>, 7> blocks(const SceneGradients& grads);

double sigmoid(double x);

/// sigmoid(logit) * max_disparity, elementwise.
Image normalized_disparity(const Image& logits, double max_disparity);

/// depth = fx * baseline / (s * width); throws for s <= 0.
double disparity_to_depth(double s, const Intrinsics& K, double baseline);
double depth_to_disparity(double depth, const Intrinsics& K, double baseline);
Image disparity_to_depth(const Image& s, const Intrinsics& K, double baseline);

}  // namespace dcdepth
