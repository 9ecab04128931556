#pragma once

#include <vector>

#include "dcdepth/geometry.hpp"
#include "dcdepth/image.hpp"

namespace dcdepth {

/// Image reconstructed by sampling; pixels with `valid == 0` hold zero and
/// must be left out of every loss.
struct SampledImage {
  Image image;
  ValidityMask valid;

  [[nodiscard]] std::size_t valid_count() const;
};

/// Bilinear interpolation of `src` at every grid coordinate. A grid pixel is
/// sampled only when it is flagged valid and lies in [0, W-1] x [0, H-1] of
/// `src`.
SampledImage bilinear_sample(const Image& src, const CoordGrid& grid);

struct SampleGradients {
  Image src;              ///< same shape as the sampled source
  std::vector<double> u;  ///< per grid pixel
  std::vector<double> v;
};

/// Exact vector-Jacobian product of bilinear_sample. `upstream` has the
/// grid's size and the source's channel count. At integer coordinates the
/// coordinate gradient is the forward difference towards the next pixel
/// (the backward one on the last row/column).
SampleGradients bilinear_sample_vjp(const Image& src, const CoordGrid& grid,
                                    const Image& upstream);

}  // namespace dcdepth
