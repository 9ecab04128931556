#include "dcdepth/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dcdepth {

LossWeights LossWeights::with_standard_ssim_constants() {
  LossWeights w;
  w.c1 = 0.01 * 0.01;
  w.c2 = 0.03 * 0.03;
  return w;
}

void LossWeights::validate() const {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("loss weights: ") + name +
                                  " must be a non-negative number");
    }
  };
  nonneg(image, "image");
  nonneg(smooth, "smooth");
  nonneg(consistency, "consistency");
  nonneg(explainability, "explainability");
  nonneg(c1, "c1");
  nonneg(c2, "c2");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("loss weights: alpha must lie in [0, 1]");
  }
}

namespace {

double sign(double x) { return (x > 0.0) - (x < 0.0); }

bool is_valid(const ValidityMask* valid, std::size_t i) {
  return valid == nullptr || (*valid)[i] != 0;
}

struct WindowStats {
  double mu_x = 0.0;
  double mu_y = 0.0;
  double var_x = 0.0;
  double var_y = 0.0;
  double cov = 0.0;
  int n = 0;
};

// 3x3 window around (px, py), cropped to the image and to valid pixels.
WindowStats window_stats(const Image& x, const Image& y, int px, int py, int c,
                         const ValidityMask* valid) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
  int n = 0;
  const int x0 = std::max(px - 1, 0), x1 = std::min(px + 1, x.width - 1);
  const int y0 = std::max(py - 1, 0), y1 = std::min(py + 1, x.height - 1);
  for (int qy = y0; qy <= y1; ++qy) {
    for (int qx = x0; qx <= x1; ++qx) {
      if (!is_valid(valid, static_cast<std::size_t>(qy) * x.width + qx)) continue;
      const double a = x.at(qx, qy, c);
      const double b = y.at(qx, qy, c);
      sx += a;
      sy += b;
      sxx += a * a;
      syy += b * b;
      sxy += a * b;
      ++n;
    }
  }
  WindowStats s;
  s.n = n;
  if (n == 0) return s;
  const double inv = 1.0 / n;
  s.mu_x = sx * inv;
  s.mu_y = sy * inv;
  // identical expressions for variance and covariance make SSIM(x, x) == 1
  s.var_x = sxx * inv - s.mu_x * s.mu_x;
  s.var_y = syy * inv - s.mu_y * s.mu_y;
  s.cov = sxy * inv - s.mu_x * s.mu_y;
  return s;
}

struct SsimTerms {
  double value;
  double num_mean, num_var, den_mean, den_var;
};

SsimTerms ssim_terms(const WindowStats& s, double c1, double c2) {
  SsimTerms t{};
  t.num_mean = 2.0 * s.mu_x * s.mu_y + c1;
  t.num_var = 2.0 * s.cov + c2;
  t.den_mean = s.mu_x * s.mu_x + s.mu_y * s.mu_y + c1;
  t.den_var = s.var_x + s.var_y + c2;
  t.value = (t.num_mean * t.num_var) / (t.den_mean * t.den_var);
  return t;
}

void require_same_shape(const Image& a, const Image& b, const char* who) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(who) + ": image shapes differ");
  }
}

}  // namespace

MaskedMean l1_loss(const SampledImage& recon, const Image& target) {
  require_same_shape(recon.image, target, "l1_loss");
  MaskedMean out;
  double sum = 0.0;
  const int nc = target.channels;
  for (std::size_t i = 0; i < target.pixels(); ++i) {
    if (!recon.valid[i]) continue;
    ++out.count;
    for (int c = 0; c < nc; ++c) {
      sum += std::abs(recon.image.data[i * nc + c] - target.data[i * nc + c]);
    }
  }
  if (out.count > 0) out.value = sum / (static_cast<double>(out.count) * nc);
  return out;
}

Image ssim_map(const Image& x, const Image& y, double c1, double c2,
               const ValidityMask* valid) {
  require_same_shape(x, y, "ssim_map");
  if (valid != nullptr && valid->size() != x.pixels()) {
    throw std::invalid_argument("ssim_map: validity mask size mismatch");
  }
  Image out(x.width, x.height, x.channels);
  for (int py = 0; py < x.height; ++py) {
    for (int px = 0; px < x.width; ++px) {
      if (!is_valid(valid, static_cast<std::size_t>(py) * x.width + px)) continue;
      for (int c = 0; c < x.channels; ++c) {
        const WindowStats s = window_stats(x, y, px, py, c, valid);
        out.at(px, py, c) = ssim_terms(s, c1, c2).value;
      }
    }
  }
  return out;
}

MaskedMean image_loss(const SampledImage& recon, const Image& target,
                      const Image* mask_probs, const LossWeights& w,
                      ImageLossGradients* grad) {
  require_same_shape(recon.image, target, "image_loss");
  if (mask_probs != nullptr &&
      (mask_probs->channels != 1 || !mask_probs->same_size(target))) {
    throw std::invalid_argument("image_loss: mask must be single-channel and match the image");
  }
  const int W = target.width;
  const int H = target.height;
  const int nc = target.channels;
  const ValidityMask* valid = &recon.valid;
  const Image& rec = recon.image;

  MaskedMean out;
  out.count = recon.valid_count();
  if (grad != nullptr) {
    grad->recon = Image(W, H, nc);
    grad->mask = Image(W, H, 1);
  }
  if (out.count == 0) return out;

  const double inv_n = 1.0 / static_cast<double>(out.count);
  const double inv_c = 1.0 / nc;
  double sum = 0.0;

  for (int py = 0; py < H; ++py) {
    for (int px = 0; px < W; ++px) {
      const std::size_t i = static_cast<std::size_t>(py) * W + px;
      if (!recon.valid[i]) continue;
      const double e = mask_probs != nullptr ? mask_probs->data[i] : 1.0;

      double ssim_mean = 0.0;
      double l1_mean = 0.0;
      for (int c = 0; c < nc; ++c) {
        const WindowStats s = window_stats(target, rec, px, py, c, valid);
        const SsimTerms t = ssim_terms(s, w.c1, w.c2);
        ssim_mean += t.value;
        const double diff = rec.data[i * nc + c] - target.data[i * nc + c];
        l1_mean += std::abs(diff);

        if (grad == nullptr) continue;
        // SSIM term: spread d(SSIM)/d(window stats) over the window pixels
        const double scale = -w.alpha * 0.5 * e * inv_c * inv_n;
        const double den = t.den_mean * t.den_var;
        const double d_mu = (2.0 * s.mu_x * t.num_var) / den - t.value * 2.0 * s.mu_y / t.den_mean;
        const double d_cov = 2.0 * t.num_mean / den;
        const double d_var = -t.value / t.den_var;
        const double inv_win = 1.0 / s.n;
        const int x0 = std::max(px - 1, 0), x1 = std::min(px + 1, W - 1);
        const int y0 = std::max(py - 1, 0), y1 = std::min(py + 1, H - 1);
        for (int qy = y0; qy <= y1; ++qy) {
          for (int qx = x0; qx <= x1; ++qx) {
            const std::size_t q = static_cast<std::size_t>(qy) * W + qx;
            if (!recon.valid[q]) continue;
            const double rq = rec.data[q * nc + c];
            const double tq = target.data[q * nc + c];
            const double dssim = inv_win * (d_mu + d_var * 2.0 * (rq - s.mu_y) +
                                            d_cov * (tq - s.mu_x));
            grad->recon.data[q * nc + c] += scale * dssim;
          }
        }
        grad->recon.data[i * nc + c] += (1.0 - w.alpha) * e * inv_c * inv_n * sign(diff);
      }
      ssim_mean *= inv_c;
      l1_mean *= inv_c;
      const double err = w.alpha * 0.5 * (1.0 - ssim_mean) + (1.0 - w.alpha) * l1_mean;
      sum += e * err;
      if (grad != nullptr) grad->mask.data[i] = err * inv_n;
    }
  }
  out.value = sum * inv_n;
  return out;
}

double smoothness_loss(const Image& disparity, const Image& img,
                       Image* grad_disparity) {
  if (disparity.channels != 1 || !disparity.same_size(img)) {
    throw std::invalid_argument("smoothness_loss: disparity must be single-channel and match the image");
  }
  const int W = img.width;
  const int H = img.height;
  const int nc = img.channels;
  const double inv_n = 1.0 / static_cast<double>(disparity.pixels());
  if (grad_disparity != nullptr) *grad_disparity = Image(W, H, 1);

  auto edge_weight = [&](int xa, int ya, int xb, int yb) {
    double g = 0.0;
    for (int c = 0; c < nc; ++c) g += std::abs(img.at(xa, ya, c) - img.at(xb, yb, c));
    return std::exp(-g / nc);
  };

  double sum = 0.0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double d = disparity.at(x, y);
      if (x + 1 < W) {
        const double dx = d - disparity.at(x + 1, y);
        const double wgt = edge_weight(x, y, x + 1, y);
        sum += std::abs(dx) * wgt;
        if (grad_disparity != nullptr) {
          const double g = sign(dx) * wgt * inv_n;
          grad_disparity->at(x, y) += g;
          grad_disparity->at(x + 1, y) -= g;
        }
      }
      if (y + 1 < H) {
        const double dy = d - disparity.at(x, y + 1);
        const double wgt = edge_weight(x, y, x, y + 1);
        sum += std::abs(dy) * wgt;
        if (grad_disparity != nullptr) {
          const double g = sign(dy) * wgt * inv_n;
          grad_disparity->at(x, y) += g;
          grad_disparity->at(x, y + 1) -= g;
        }
      }
    }
  }
  return sum * inv_n;
}

MaskedMean consistency_loss(const Image& anchor, const Image& other,
                            const Pose6& pose, const Intrinsics& K,
                            ConsistencyGradients* grad) {
  if (anchor.channels != 1 || !anchor.same_shape(other) ||
      anchor.width != K.width || anchor.height != K.height) {
    throw std::invalid_argument("consistency_loss: depth maps must be single-channel and match the intrinsics");
  }
  const CoordGrid grid = warp_coordinates(anchor, pose, K);
  const SampledImage warped = bilinear_sample(anchor, grid);

  MaskedMean out;
  out.count = warped.valid_count();
  if (grad != nullptr) {
    grad->anchor = Image(K.width, K.height, 1);
    grad->other = Image(K.width, K.height, 1);
    grad->pose.fill(0.0);
  }
  if (out.count == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(out.count);

  double sum = 0.0;
  Image upstream(K.width, K.height, 1);
  for (std::size_t i = 0; i < anchor.pixels(); ++i) {
    if (!warped.valid[i]) continue;
    const double diff = warped.image.data[i] - other.data[i];
    sum += std::abs(diff);
    upstream.data[i] = sign(diff) * inv_n;
  }
  out.value = sum * inv_n;
  if (grad == nullptr) return out;

  for (std::size_t i = 0; i < anchor.pixels(); ++i) grad->other.data[i] = -upstream.data[i];
  const SampleGradients sg = bilinear_sample_vjp(anchor, grid, upstream);
  const WarpGradients wg = warp_coordinates_vjp(anchor, pose, K, grid, sg.u, sg.v);
  for (std::size_t i = 0; i < anchor.pixels(); ++i) {
    grad->anchor.data[i] = sg.src.data[i] + wg.depth.data[i];
  }
  grad->pose = wg.pose;
  return out;
}

double explainability_loss(const Image& mask_logits, Image* grad_logits) {
  const std::size_t n = mask_logits.data.size();
  if (n == 0) throw std::invalid_argument("explainability_loss: empty mask");
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grad_logits != nullptr) {
    *grad_logits = Image(mask_logits.width, mask_logits.height, mask_logits.channels);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = -mask_logits.data[i];
    // softplus(z) = log(1 + e^z) without overflow
    sum += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    if (grad_logits != nullptr) {
      grad_logits->data[i] = -(1.0 - sigmoid(mask_logits.data[i])) * inv_n;
    }
  }
  return sum * inv_n;
}

Pose6 direction_pose(View target, const Pose6& stereo, const Pose6& temporal) {
  switch (target) {
    case View::kRight: return stereo;
    case View::kNextLeft: return temporal;
    case View::kNextRight: return compose_small(stereo, temporal);
    case View::kLeft: break;
  }
  throw std::invalid_argument("direction_pose: the left view is the source");
}

namespace {

void add_scaled(Image& dst, const Image& src, double scale) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += scale * src.data[i];
}

void add_pose_grad(std::array<double, 6>& dst, const std::array<double, 6>& src,
                   double scale) {
  for (std::size_t k = 0; k < 6; ++k) dst[k] += scale * src[k];
}

Image pool(const Image& img, int times) {
  Image out = img;
  for (int k = 0; k < times; ++k) out = downsample2(out);
  return out;
}

// adjoint of pool(); `sizes[k]` is the (width, height) after k halvings
Image unpool(Image grad, const std::vector<std::pair<int, int>>& sizes, int times) {
  for (int k = times; k > 0; --k) {
    const auto [w, h] = sizes[static_cast<std::size_t>(k - 1)];
    grad = downsample2_adjoint(grad, w, h);
  }
  return grad;
}

}  // namespace

LossBreakdown total_loss(const ScenePyramid& pyr, int base_level,
                         const SceneParams& params, const LossWeights& w,
                         SceneGradients* grad) {
  w.validate();
  if (base_level < 0 || base_level >= pyr.levels()) {
    throw std::invalid_argument("total_loss: base level outside the pyramid");
  }
  const Intrinsics& base_K = pyr.intrinsics[static_cast<std::size_t>(base_level)];
  if (params.width() != base_K.width || params.height() != base_K.height) {
    throw std::invalid_argument("total_loss: parameter size does not match the pyramid level");
  }
  for (const Image& f : params.disparity_logits) {
    if (!f.same_shape(params.mask_logits)) {
      throw std::invalid_argument("total_loss: parameter fields differ in shape");
    }
  }

  const int num_levels = pyr.levels() - base_level;
  std::vector<std::pair<int, int>> sizes;
  {
    int sw = params.width(), sh = params.height();
    for (int j = 0; j < num_levels; ++j) {
      sizes.emplace_back(sw, sh);
      sw /= 2;
      sh /= 2;
    }
  }

  std::array<Image, 4> disp0;
  for (std::size_t v = 0; v < 4; ++v) {
    disp0[v] = normalized_disparity(params.disparity_logits[v], params.max_disparity);
  }
  Image mask0(params.width(), params.height(), 1);
  for (std::size_t i = 0; i < mask0.data.size(); ++i) {
    mask0.data[i] = sigmoid(params.mask_logits.data[i]);
  }

  LossBreakdown out;
  std::array<Image, 4> grad_disp0;
  Image grad_mask0;
  std::array<double, 6> grad_stereo{};
  std::array<double, 6> grad_temporal{};
  if (grad != nullptr) {
    for (auto& g : grad_disp0) g = Image(params.width(), params.height(), 1);
    grad_mask0 = Image(params.width(), params.height(), 1);
  }

  for (int j = 0; j < num_levels; ++j) {
    const auto level = static_cast<std::size_t>(base_level + j);
    const std::array<Image, 4>& imgs = pyr.images[level];
    const Intrinsics& K = pyr.intrinsics[level];

    std::array<Image, 4> disp;
    std::array<Image, 4> depth;
    for (std::size_t v = 0; v < 4; ++v) {
      disp[v] = pool(disp0[v], j);
      depth[v] = disparity_to_depth(disp[v], K, pyr.baseline);
    }
    const Image mask = pool(mask0, j);

    std::array<Image, 4> grad_disp;
    std::array<Image, 4> grad_depth;
    Image grad_mask;
    if (grad != nullptr) {
      for (std::size_t v = 0; v < 4; ++v) {
        grad_disp[v] = Image(K.width, K.height, 1);
        grad_depth[v] = Image(K.width, K.height, 1);
      }
      grad_mask = Image(K.width, K.height, 1);
    }

    double level_image = 0.0, level_smooth = 0.0, level_consistency = 0.0;
    const Image& source = imgs[idx(View::kLeft)];

    for (View target : kTargetViews) {
      const auto t = static_cast<std::size_t>(idx(target));
      const Pose6 pose = direction_pose(target, params.stereo, params.temporal);
      const bool to_stereo = target != View::kNextLeft;
      const bool to_temporal = target != View::kRight;

      // photometric reconstruction of the target view from I_l
      const CoordGrid grid = warp_coordinates(depth[t], pose, K);
      const SampledImage recon = bilinear_sample(source, grid);
      ImageLossGradients ig;
      const MaskedMean li = image_loss(recon, imgs[t], &mask, w,
                                       grad != nullptr ? &ig : nullptr);
      level_image += li.value;
      out.empty_terms += li.empty();
      if (grad != nullptr && !li.empty()) {
        for (double& g : ig.recon.data) g *= w.image;
        const SampleGradients sg = bilinear_sample_vjp(source, grid, ig.recon);
        const WarpGradients wg = warp_coordinates_vjp(depth[t], pose, K, grid, sg.u, sg.v);
        add_scaled(grad_depth[t], wg.depth, 1.0);
        if (to_stereo) add_pose_grad(grad_stereo, wg.pose, 1.0);
        if (to_temporal) add_pose_grad(grad_temporal, wg.pose, 1.0);
        add_scaled(grad_mask, ig.mask, w.image);
      }

      ConsistencyGradients cg;
      const MaskedMean lc = consistency_loss(depth[idx(View::kLeft)], depth[t], pose, K,
                                             grad != nullptr ? &cg : nullptr);
      level_consistency += lc.value;
      out.empty_terms += lc.empty();
      if (grad != nullptr && !lc.empty()) {
        add_scaled(grad_depth[idx(View::kLeft)], cg.anchor, w.consistency);
        add_scaled(grad_depth[t], cg.other, w.consistency);
        if (to_stereo) add_pose_grad(grad_stereo, cg.pose, w.consistency);
        if (to_temporal) add_pose_grad(grad_temporal, cg.pose, w.consistency);
      }
    }

    for (std::size_t v = 0; v < 4; ++v) {
      Image gs;
      level_smooth += smoothness_loss(disp[v], imgs[v], grad != nullptr ? &gs : nullptr);
      if (grad != nullptr) add_scaled(grad_disp[v], gs, w.smooth);
    }

    out.image += level_image;
    out.smooth += level_smooth;
    out.consistency += level_consistency;
    out.per_scale.push_back(w.image * level_image + w.smooth * level_smooth +
                            w.consistency * level_consistency);

    if (grad != nullptr) {
      for (std::size_t v = 0; v < 4; ++v) {
        // depth = c / s  =>  d(depth)/ds = -depth / s
        for (std::size_t i = 0; i < grad_disp[v].data.size(); ++i) {
          grad_disp[v].data[i] -= grad_depth[v].data[i] * depth[v].data[i] / disp[v].data[i];
        }
        add_scaled(grad_disp0[v], unpool(std::move(grad_disp[v]), sizes, j), 1.0);
      }
      add_scaled(grad_mask0, unpool(std::move(grad_mask), sizes, j), 1.0);
    }
  }

  Image grad_exp;
  out.explainability =
      explainability_loss(params.mask_logits, grad != nullptr ? &grad_exp : nullptr);
  out.total = w.image * out.image + w.smooth * out.smooth +
              w.consistency * out.consistency + w.explainability * out.explainability;

  if (grad != nullptr) {
    *grad = SceneGradients::zeros_like(params);
    for (std::size_t v = 0; v < 4; ++v) {
      // ds/dlogit = s * (1 - sigmoid(logit))
      for (std::size_t i = 0; i < disp0[v].data.size(); ++i) {
        const double p = sigmoid(params.disparity_logits[v].data[i]);
        grad->disparity_logits[v].data[i] = grad_disp0[v].data[i] * disp0[v].data[i] * (1.0 - p);
      }
    }
    for (std::size_t i = 0; i < mask0.data.size(); ++i) {
      const double p = mask0.data[i];
      grad->mask_logits.data[i] =
          grad_mask0.data[i] * p * (1.0 - p) + w.explainability * grad_exp.data[i];
    }
    grad->stereo.v = grad_stereo;
    grad->temporal.v = grad_temporal;
  }
  return out;
}

}  // namespace dcdepth
