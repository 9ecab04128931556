#pragma once

#include <optional>
#include <string>

#include "dcdepth/image.hpp"
#include "dcdepth/optim.hpp"

namespace dcdepth {

inline constexpr double kDepthFloor = 1e-3;

struct MetricReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  std::optional<double> d1_all;  ///< percentage, when disparities were available
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t valid_count = 0;
  double cap = 0.0;

  /// One `key=value` per line.
  [[nodiscard]] std::string to_key_value() const;
  /// abs_rel,sq_rel,rmse,rmse_log,d1_all,delta1,delta2,delta3 (d1_all empty
  /// when absent).
  [[nodiscard]] std::string to_csv_row() const;
  static std::string csv_header();
};

/// Eigen error suite over pixels where `gt_valid` is set, with both depths
/// clamped to [1e-3, cap]. Throws std::invalid_argument on shape mismatch or
/// when no pixel is valid.
MetricReport eigen_metrics(const Image& pred, const Image& gt, const ValidityMask& gt_valid,
                           double cap = 80.0);

/// KITTI outlier rate in percent: |p - g| > 3 px and |p - g| > 5% of g.
double d1_all(const Image& pred_disp, const Image& gt_disp, const ValidityMask& gt_valid);

/// Column weight given to the map computed from the flipped input.
double flip_merge_weight(int x, int width);

/// Blends a disparity map with the re-flipped map of the mirrored input:
/// the flipped-source map alone at the left border, their mean in the middle,
/// the unflipped map alone at the right border, with linear ramps over the
/// outer 5% of columns.
Image flip_merge(const Image& disp, const Image& disp_from_flipped);

enum class EvalView { kRight, kLeft };

/// Normalized disparity of the map used for evaluation (D_r unless
/// overridden).
Image select_eval_map(const SceneState& state, EvalView view = EvalView::kRight);

}  // namespace dcdepth
