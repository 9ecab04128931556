#include "dcdepth/scene.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dcdepth {

std::string_view view_name(View v) {
  switch (v) {
    case View::kLeft: return "l";
    case View::kRight: return "r";
    case View::kNextLeft: return "l1";
    case View::kNextRight: return "r1";
  }
  return "?";
}

void SceneSample::validate() const {
  intrinsics.validate();
  if (!(baseline > 0.0) || !std::isfinite(baseline)) {
    throw std::invalid_argument("scene: baseline must be positive");
  }
  for (View v : kAllViews) {
    const Image& img = image(v);
    if (img.width != intrinsics.width || img.height != intrinsics.height) {
      throw std::invalid_argument("scene: image " + std::string(view_name(v)) +
                                  " does not match the calibration size");
    }
    if (img.channels != images[0].channels) {
      throw std::invalid_argument("scene: images differ in channel count");
    }
  }
}

ScenePyramid ScenePyramid::build(const SceneSample& sample, int levels) {
  sample.validate();
  if (levels < 1) throw std::invalid_argument("pyramid: need at least one level");
  ScenePyramid pyr;
  pyr.baseline = sample.baseline;
  pyr.images.push_back(sample.images);
  pyr.intrinsics.push_back(sample.intrinsics);
  for (int l = 1; l < levels; ++l) {
    const Intrinsics& prev = pyr.intrinsics.back();
    if (prev.width / 2 < 2 || prev.height / 2 < 2) {
      throw std::invalid_argument("pyramid: image too small for " +
                                  std::to_string(levels) + " levels");
    }
    std::array<Image, 4> next;
    for (std::size_t v = 0; v < 4; ++v) next[v] = downsample2(pyr.images.back()[v]);
    pyr.images.push_back(std::move(next));
    pyr.intrinsics.push_back(prev.halved());
  }
  return pyr;
}

SceneParams SceneParams::constant(int width, int height, double disparity_logit,
                                  double mask_logit, const Pose6& stereo,
                                  const Pose6& temporal, double max_disparity) {
  SceneParams p;
  for (auto& field : p.disparity_logits) field = Image(width, height, 1, disparity_logit);
  p.mask_logits = Image(width, height, 1, mask_logit);
  p.stereo = stereo;
  p.temporal = temporal;
  p.max_disparity = max_disparity;
  return p;
}

SceneGradients SceneGradients::zeros_like(const SceneParams& params) {
  SceneGradients g;
  for (auto& field : g.disparity_logits) field = Image(params.width(), params.height(), 1);
  g.mask_logits = Image(params.width(), params.height(), 1);
  return g;
}

namespace {

template <typename T>
auto make_blocks(T& p) {
  using Span = std::span<std::remove_reference_t<decltype(p.mask_logits.data[0])>>;
  return std::array<Span, 7>{
      Span(p.disparity_logits[0].data), Span(p.disparity_logits[1].data),
      Span(p.disparity_logits[2].data), Span(p.disparity_logits[3].data),
      Span(p.stereo.v),                 Span(p.temporal.v),
      Span(p.mask_logits.data)};
}

}  // namespace

std::array<std::span<double>, 7> blocks(SceneParams& params) { return make_blocks(params); }
std::array<std::span<double>, 7> blocks(SceneGradients& grads) { return make_blocks(grads); }
std::array<std::span<const double>, 7> blocks(const SceneGradients& grads) {
  return make_blocks(grads);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Image normalized_disparity(const Image& logits, double max_disparity) {
  Image out(logits.width, logits.height, 1);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = sigmoid(logits.data[i]) * max_disparity;
  }
  return out;
}

double disparity_to_depth(double s, const Intrinsics& K, double baseline) {
  if (!(s > 0.0)) {
    throw std::invalid_argument("disparity_to_depth: disparity must be positive");
  }
  return K.fx * baseline / (s * K.width);
}

double depth_to_disparity(double depth, const Intrinsics& K, double baseline) {
  if (!(depth > 0.0)) {
    throw std::invalid_argument("depth_to_disparity: depth must be positive");
  }
  return K.fx * baseline / (depth * K.width);
}

Image disparity_to_depth(const Image& s, const Intrinsics& K, double baseline) {
  Image out(s.width, s.height, 1);
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    out.data[i] = disparity_to_depth(s.data[i], K, baseline);
  }
  return out;
}

}  // namespace dcdepth
