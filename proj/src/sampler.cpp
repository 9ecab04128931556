#include "dcdepth/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dcdepth {

namespace {

struct Cell {
  int x0, x1, y0, y1;
  double fu, fv;
};

// Cell containing (u, v). On the last column/row the cell is shifted back by
// one so that both neighbours exist and the fraction becomes 1.
Cell locate(double u, double v, int w, int h) {
  Cell c{};
  c.x0 = static_cast<int>(std::floor(u));
  c.y0 = static_cast<int>(std::floor(v));
  if (c.x0 >= w - 1) c.x0 = std::max(w - 2, 0);
  if (c.y0 >= h - 1) c.y0 = std::max(h - 2, 0);
  c.x1 = std::min(c.x0 + 1, w - 1);
  c.y1 = std::min(c.y0 + 1, h - 1);
  c.fu = u - c.x0;
  c.fv = v - c.y0;
  return c;
}

bool inside(double u, double v, const Image& src) {
  return u >= 0.0 && v >= 0.0 && u <= src.width - 1 && v <= src.height - 1;
}

void check_grid(const Image& src, const CoordGrid& grid) {
  if (src.empty()) throw std::invalid_argument("bilinear_sample: empty source");
  const std::size_t n = static_cast<std::size_t>(grid.width) * grid.height;
  if (grid.u.size() != n || grid.v.size() != n || grid.valid.size() != n) {
    throw std::invalid_argument("bilinear_sample: malformed coordinate grid");
  }
}

}  // namespace

std::size_t SampledImage::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 1));
}

SampledImage bilinear_sample(const Image& src, const CoordGrid& grid) {
  check_grid(src, grid);
  SampledImage out;
  out.image = Image(grid.width, grid.height, src.channels);
  out.valid.assign(grid.size(), 0);
  const int nc = src.channels;

  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!grid.valid[i]) continue;
    const double u = grid.u[i];
    const double v = grid.v[i];
    if (!inside(u, v, src)) continue;
    out.valid[i] = 1;

    const Cell c = locate(u, v, src.width, src.height);
    const double w00 = (1.0 - c.fu) * (1.0 - c.fv);
    const double w10 = c.fu * (1.0 - c.fv);
    const double w01 = (1.0 - c.fu) * c.fv;
    const double w11 = c.fu * c.fv;
    const double* p00 = &src.data[src.index(c.x0, c.y0)];
    const double* p10 = &src.data[src.index(c.x1, c.y0)];
    const double* p01 = &src.data[src.index(c.x0, c.y1)];
    const double* p11 = &src.data[src.index(c.x1, c.y1)];
    double* dst = &out.image.data[i * nc];
    for (int ch = 0; ch < nc; ++ch) {
      dst[ch] = w00 * p00[ch] + w10 * p10[ch] + w01 * p01[ch] + w11 * p11[ch];
    }
  }
  return out;
}

SampleGradients bilinear_sample_vjp(const Image& src, const CoordGrid& grid,
                                    const Image& upstream) {
  check_grid(src, grid);
  if (upstream.width != grid.width || upstream.height != grid.height ||
      upstream.channels != src.channels) {
    throw std::invalid_argument("bilinear_sample_vjp: upstream shape mismatch");
  }
  const int nc = src.channels;
  SampleGradients out;
  out.src = Image(src.width, src.height, nc);
  out.u.assign(grid.size(), 0.0);
  out.v.assign(grid.size(), 0.0);

  // row-major scatter order keeps grad_src accumulation deterministic
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!grid.valid[i]) continue;
    const double u = grid.u[i];
    const double v = grid.v[i];
    if (!inside(u, v, src)) continue;

    const Cell c = locate(u, v, src.width, src.height);
    const double w00 = (1.0 - c.fu) * (1.0 - c.fv);
    const double w10 = c.fu * (1.0 - c.fv);
    const double w01 = (1.0 - c.fu) * c.fv;
    const double w11 = c.fu * c.fv;
    const std::size_t i00 = src.index(c.x0, c.y0);
    const std::size_t i10 = src.index(c.x1, c.y0);
    const std::size_t i01 = src.index(c.x0, c.y1);
    const std::size_t i11 = src.index(c.x1, c.y1);

    double gu = 0.0;
    double gv = 0.0;
    for (int ch = 0; ch < nc; ++ch) {
      const double g = upstream.data[i * nc + ch];
      if (g == 0.0) continue;
      const double a = src.data[i00 + ch];
      const double b = src.data[i10 + ch];
      const double d = src.data[i01 + ch];
      const double e = src.data[i11 + ch];
      out.src.data[i00 + ch] += g * w00;
      out.src.data[i10 + ch] += g * w10;
      out.src.data[i01 + ch] += g * w01;
      out.src.data[i11 + ch] += g * w11;
      gu += g * ((1.0 - c.fv) * (b - a) + c.fv * (e - d));
      gv += g * ((1.0 - c.fu) * (d - a) + c.fu * (e - b));
    }
    out.u[i] = gu;
    out.v[i] = gv;
  }
  return out;
}

}  // namespace dcdepth
