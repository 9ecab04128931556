#include "dcdepth/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace dcdepth {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void check_inputs(const Image& pred, const Image& gt, const ValidityMask& valid,
                  const char* who) {
  if (pred.channels != 1 || !pred.same_shape(gt)) {
    throw std::invalid_argument(std::string(who) + ": prediction and ground truth shapes differ");
  }
  if (valid.size() != gt.pixels()) {
    throw std::invalid_argument(std::string(who) + ": validity mask size mismatch");
  }
}

}  // namespace

std::string MetricReport::csv_header() {
  return "abs_rel,sq_rel,rmse,rmse_log,d1_all,delta1,delta2,delta3";
}

std::string MetricReport::to_csv_row() const {
  return fmt(abs_rel) + "," + fmt(sq_rel) + "," + fmt(rmse) + "," + fmt(rmse_log) + "," +
         (d1_all ? fmt(*d1_all) : std::string()) + "," + fmt(delta1) + "," + fmt(delta2) +
         "," + fmt(delta3);
}

std::string MetricReport::to_key_value() const {
  std::ostringstream out;
  out << "abs_rel=" << fmt(abs_rel) << "\n"
      << "sq_rel=" << fmt(sq_rel) << "\n"
      << "rmse=" << fmt(rmse) << "\n"
      << "rmse_log=" << fmt(rmse_log) << "\n";
  if (d1_all) out << "d1_all=" << fmt(*d1_all) << "\n";
  out << "delta1=" << fmt(delta1) << "\n"
      << "delta2=" << fmt(delta2) << "\n"
      << "delta3=" << fmt(delta3) << "\n"
      << "valid_count=" << valid_count << "\n"
      << "cap=" << fmt(cap) << "\n";
  return out.str();
}

MetricReport eigen_metrics(const Image& pred, const Image& gt, const ValidityMask& gt_valid,
                           double cap) {
  check_inputs(pred, gt, gt_valid, "eigen_metrics");
  if (!(cap > kDepthFloor)) throw std::invalid_argument("eigen_metrics: cap must exceed 1e-3");

  MetricReport r;
  r.cap = cap;
  double abs_rel = 0, sq_rel = 0, sq = 0, sq_log = 0;
  std::size_t d1 = 0, d2 = 0, d3 = 0, n = 0;
  const double t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;
  for (std::size_t i = 0; i < gt.pixels(); ++i) {
    if (!gt_valid[i]) continue;
    const double p = std::clamp(pred.data[i], kDepthFloor, cap);
    const double g = std::clamp(gt.data[i], kDepthFloor, cap);
    const double e = p - g;
    abs_rel += std::abs(e) / g;
    sq_rel += e * e / g;
    sq += e * e;
    const double le = std::log(p) - std::log(g);
    sq_log += le * le;
    const double ratio = std::max(p / g, g / p);
    d1 += ratio < t1;
    d2 += ratio < t2;
    d3 += ratio < t3;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("eigen_metrics: no valid ground-truth pixels");
  const double inv = 1.0 / static_cast<double>(n);
  r.abs_rel = abs_rel * inv;
  r.sq_rel = sq_rel * inv;
  r.rmse = std::sqrt(sq * inv);
  r.rmse_log = std::sqrt(sq_log * inv);
  r.delta1 = static_cast<double>(d1) * inv;
  r.delta2 = static_cast<double>(d2) * inv;
  r.delta3 = static_cast<double>(d3) * inv;
  r.valid_count = n;
  return r;
}

double d1_all(const Image& pred_disp, const Image& gt_disp, const ValidityMask& gt_valid) {
  check_inputs(pred_disp, gt_disp, gt_valid, "d1_all");
  std::size_t outliers = 0, n = 0;
  for (std::size_t i = 0; i < gt_disp.pixels(); ++i) {
    if (!gt_valid[i]) continue;
    const double err = std::abs(pred_disp.data[i] - gt_disp.data[i]);
    outliers += err > 3.0 && err > 0.05 * std::abs(gt_disp.data[i]);
    ++n;
  }
  if (n == 0) throw std::invalid_argument("d1_all: no valid ground-truth pixels");
  return 100.0 * static_cast<double>(outliers) / static_cast<double>(n);
}

double flip_merge_weight(int x, int width) {
  if (width < 1 || x < 0 || x >= width) throw std::out_of_range("flip_merge_weight: bad column");
  const double stripe = 0.05 * width;
  const double from_left = static_cast<double>(x);
  const double from_right = static_cast<double>(width - 1 - x);
  const double left = 1.0 - 0.5 * std::min(from_left / stripe, 1.0);
  const double right = 0.5 * std::min(from_right / stripe, 1.0);
  return left + right - 0.5;
}

Image flip_merge(const Image& disp, const Image& disp_from_flipped) {
  if (!disp.same_shape(disp_from_flipped)) {
    throw std::invalid_argument("flip_merge: input shapes differ");
  }
  Image out(disp.width, disp.height, disp.channels);
  for (int x = 0; x < disp.width; ++x) {
    const double w = flip_merge_weight(x, disp.width);
    for (int y = 0; y < disp.height; ++y) {
      for (int c = 0; c < disp.channels; ++c) {
        const double f = disp_from_flipped.at(x, y, c);
        const double u = disp.at(x, y, c);
        // anchored at the dominant input so that w = 0 or 1 and f == u are exact
        out.at(x, y, c) = w >= 0.5 ? f + (1.0 - w) * (u - f) : u + w * (f - u);
      }
    }
  }
  return out;
}

Image select_eval_map(const SceneState& state, EvalView view) {
  const View v = view == EvalView::kRight ? View::kRight : View::kLeft;
  return normalized_disparity(state.params.disparity_logits[static_cast<std::size_t>(idx(v))],
                              state.params.max_disparity);
}

}  // namespace dcdepth
