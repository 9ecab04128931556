#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dcdepth {

/// Dense row-major grid of doubles with interleaved channels.
///
/// Used for photometric images (1 or 3 channels, values in [0,1]) as well
/// as single-channel scalar fields such as depth, disparity, logits and
/// gradients.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c = 1, double fill = 0.0);

  [[nodiscard]] bool empty() const { return data.empty(); }
  [[nodiscard]] std::size_t pixels() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  [[nodiscard]] std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  [[nodiscard]] double at(int x, int y, int c = 0) const {
    return data[index(x, y, c)];
  }

  [[nodiscard]] bool same_shape(const Image& other) const {
    return width == other.width && height == other.height &&
           channels == other.channels;
  }
  [[nodiscard]] bool same_size(const Image& other) const {
    return width == other.width && height == other.height;
  }
};

/// Per-pixel validity flags, row-major, one byte per pixel.
using ValidityMask = std::vector<std::uint8_t>;

/// 2x2 box average; odd trailing rows/columns are dropped.
Image downsample2(const Image& img);

/// Adjoint of downsample2: spreads each coarse gradient a quarter to each
/// of its four fine pixels. `fine_width`/`fine_height` give the original
/// size so dropped rows/columns receive zero.
Image downsample2_adjoint(const Image& grad, int fine_width, int fine_height);

/// Bilinear resize with pixel-center alignment and edge clamping.
/// Constant inputs map to bit-identical constant outputs.
Image upsample_bilinear(const Image& img, int width, int height);

Image flip_horizontal(const Image& img);

/// Single-channel image holding one channel of `img`.
Image extract_channel(const Image& img, int channel);

}  // namespace dcdepth
