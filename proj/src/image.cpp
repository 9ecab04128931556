#include "dcdepth/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dcdepth {

Image::Image(int w, int h, int c, double fill)
    : width(w), height(h), channels(c) {
  if (w < 0 || h < 0 || c < 1) {
    throw std::invalid_argument("Image: invalid dimensions");
  }
  data.assign(static_cast<std::size_t>(w) * h * c, fill);
}

Image downsample2(const Image& img) {
  const int w = img.width / 2;
  const int h = img.height / 2;
  if (w < 1 || h < 1) {
    throw std::invalid_argument("downsample2: image too small to halve");
  }
  Image out(w, h, img.channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        const double sum = img.at(2 * x, 2 * y, c) + img.at(2 * x + 1, 2 * y, c) +
                           img.at(2 * x, 2 * y + 1, c) +
                           img.at(2 * x + 1, 2 * y + 1, c);
        out.at(x, y, c) = 0.25 * sum;
      }
    }
  }
  return out;
}

Image downsample2_adjoint(const Image& grad, int fine_width, int fine_height) {
  if (grad.width != fine_width / 2 || grad.height != fine_height / 2) {
    throw std::invalid_argument("downsample2_adjoint: size mismatch");
  }
  Image out(fine_width, fine_height, grad.channels);
  for (int y = 0; y < grad.height; ++y) {
    for (int x = 0; x < grad.width; ++x) {
      for (int c = 0; c < grad.channels; ++c) {
        const double g = 0.25 * grad.at(x, y, c);
        out.at(2 * x, 2 * y, c) = g;
        out.at(2 * x + 1, 2 * y, c) = g;
        out.at(2 * x, 2 * y + 1, c) = g;
        out.at(2 * x + 1, 2 * y + 1, c) = g;
      }
    }
  }
  return out;
}

namespace {

struct Tap {
  int i0;
  int i1;
  double frac;
};

Tap resize_tap(int dst, int dst_size, int src_size) {
  const double scale = static_cast<double>(src_size) / dst_size;
  double pos = (dst + 0.5) * scale - 0.5;
  pos = std::clamp(pos, 0.0, static_cast<double>(src_size - 1));
  const int i0 = static_cast<int>(std::floor(pos));
  const int i1 = std::min(i0 + 1, src_size - 1);
  return {i0, i1, pos - i0};
}

}  // namespace

Image upsample_bilinear(const Image& img, int width, int height) {
  if (img.empty() || width < 1 || height < 1) {
    throw std::invalid_argument("upsample_bilinear: empty input or output");
  }
  Image out(width, height, img.channels);
  for (int y = 0; y < height; ++y) {
    const Tap ty = resize_tap(y, height, img.height);
    for (int x = 0; x < width; ++x) {
      const Tap tx = resize_tap(x, width, img.width);
      for (int c = 0; c < img.channels; ++c) {
        // lerp form a + f*(b-a) keeps constant fields exact
        const double a = img.at(tx.i0, ty.i0, c);
        const double b = img.at(tx.i1, ty.i0, c);
        const double d = img.at(tx.i0, ty.i1, c);
        const double e = img.at(tx.i1, ty.i1, c);
        const double top = a + tx.frac * (b - a);
        const double bottom = d + tx.frac * (e - d);
        out.at(x, y, c) = top + ty.frac * (bottom - top);
      }
    }
  }
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
      }
    }
  }
  return out;
}

Image extract_channel(const Image& img, int channel) {
  if (channel < 0 || channel >= img.channels) {
    throw std::invalid_argument("extract_channel: channel out of range");
  }
  Image out(img.width, img.height, 1);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    out.data[i] = img.data[i * img.channels + channel];
  }
  return out;
}

}  // namespace dcdepth
