#pragma once

#include <cstddef>
#include <vector>

#include "dcdepth/geometry.hpp"
#include "dcdepth/image.hpp"
#include "dcdepth/sampler.hpp"
#include "dcdepth/scene.hpp"

namespace dcdepth {

/// Term weights and SSIM constants of the training objective.
struct LossWeights {
  double image = 1.0;
  double smooth = 1.0;
  double consistency = 1.0;
  double explainability = 1.0;
  double alpha = 0.85;  ///< SSIM share of the photometric error
  double c1 = 0.01;
  double c2 = 0.03;

  /// SSIM constants as in the original SSIM definition for unit dynamic
  /// range: (0.01)^2 and (0.03)^2.
  static LossWeights with_standard_ssim_constants();

  /// Throws std::invalid_argument on negative weights or alpha outside [0,1].
  void validate() const;
};

/// Mean over a set of pixels that may turn out empty. An empty set yields
/// value 0 and `count == 0`, which callers treat as a warning.
struct MaskedMean {
  double value = 0.0;
  std::size_t count = 0;

  [[nodiscard]] bool empty() const { return count == 0; }
};

/// Mean absolute difference over valid pixels and all channels.
MaskedMean l1_loss(const SampledImage& recon, const Image& target);

/// Per-pixel, per-channel SSIM over 3x3 windows. Windows are cropped to the
/// pixels that are inside the image and valid; invalid centres get 0.
/// `valid` may be null (everything valid).
Image ssim_map(const Image& x, const Image& y, double c1, double c2,
               const ValidityMask* valid = nullptr);

struct ImageLossGradients {
  Image recon;  ///< same shape as the reconstruction
  Image mask;   ///< single channel
};

/// (1/N) sum_ij E_ij (alpha * (1 - SSIM_ij)/2 + (1 - alpha) * |recon - target|_ij)
/// over the N valid pixels; per-pixel SSIM and L1 are channel means.
/// `mask_probs` is a single-channel map of explainability probabilities, or
/// null for E = 1.
MaskedMean image_loss(const SampledImage& recon, const Image& target,
                      const Image* mask_probs, const LossWeights& w,
                      ImageLossGradients* grad = nullptr);

/// Edge-aware smoothness of a single-channel disparity map:
/// (1/N) sum |dx d| exp(-|dx I|) + |dy d| exp(-|dy I|) with forward
/// differences, image gradients averaged over channels, N = W*H.
double smoothness_loss(const Image& disparity, const Image& img,
                       Image* grad_disparity = nullptr);

struct ConsistencyGradients {
  Image anchor;
  Image other;
  std::array<double, 6> pose{};
};

/// Warps `anchor` (a depth map) into the other view using itself as the warp
/// depth, samples it bilinearly and takes the mean absolute difference to
/// `other` over the valid pixels.
MaskedMean consistency_loss(const Image& anchor, const Image& other,
                            const Pose6& pose, const Intrinsics& K,
                            ConsistencyGradients* grad = nullptr);

/// (1/N) sum -log(sigmoid(logit)), evaluated as softplus(-logit).
double explainability_loss(const Image& mask_logits, Image* grad_logits = nullptr);

struct LossBreakdown {
  double image = 0.0;           ///< summed over directions and scales
  double smooth = 0.0;          ///< summed over the four fields and scales
  double consistency = 0.0;     ///< summed over directions and scales
  double explainability = 0.0;
  double total = 0.0;
  std::vector<double> per_scale;  ///< weighted image+smooth+consistency per scale
  std::size_t empty_terms = 0;    ///< masked means that had no valid pixel
};

/// The full objective on `params`, evaluated on pyramid levels
/// [base_level, pyr.levels()). The parameter fields must have the size of
/// level `base_level`; coarser levels see them box-downsampled.
///
/// Directions: I_r, I_{l+1} and I_{r+1} are each reconstructed from I_l with
/// their own depth map and the stereo, temporal, and summed pose
/// respectively; consistency compares D_l against each of D_r, D_{l+1},
/// D_{r+1} along the same poses. The explainability mask weights the
/// photometric term only. When `grad` is non-null it is overwritten with
/// d(total)/d(params).
LossBreakdown total_loss(const ScenePyramid& pyr, int base_level,
                         const SceneParams& params, const LossWeights& w,
                         SceneGradients* grad = nullptr);

/// Pose used to reconstruct `target` from the left view.
Pose6 direction_pose(View target, const Pose6& stereo, const Pose6& temporal);

}  // namespace dcdepth
