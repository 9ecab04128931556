#include <gtest/gtest.h>

#include <cmath>

#include "dcdepth/sampler.hpp"
#include "support.hpp"

using namespace dcdepth;

namespace {

// textbook bilinear interpolation, written independently of the library
double oracle(const Image& src, double u, double v, int c) {
  const int x0 = std::min(static_cast<int>(std::floor(u)), src.width - 2);
  const int y0 = std::min(static_cast<int>(std::floor(v)), src.height - 2);
  const double a = u - x0, b = v - y0;
  return (1 - a) * (1 - b) * src.at(x0, y0, c) + a * (1 - b) * src.at(x0 + 1, y0, c) +
         (1 - a) * b * src.at(x0, y0 + 1, c) + a * b * src.at(x0 + 1, y0 + 1, c);
}

CoordGrid random_grid(std::mt19937_64& rng, int w, int h, double lo, double hi_u, double hi_v) {
  CoordGrid g(w, h);
  std::uniform_real_distribution<double> du(lo, hi_u), dv(lo, hi_v);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.u[i] = du(rng);
    g.v[i] = dv(rng);
    g.valid[i] = 1;
  }
  return g;
}

}  // namespace

TEST(Sampler, IdentityGridReproducesSourceBitExactly) {
  std::mt19937_64 rng(1);
  const Image src = testutil::random_image(rng, 13, 9, 3);
  const SampledImage s = bilinear_sample(src, CoordGrid::identity(13, 9));
  EXPECT_EQ(s.image.data, src.data);
  EXPECT_EQ(s.valid_count(), src.pixels());
}

TEST(Sampler, MatchesScalarOracle) {
  std::mt19937_64 rng(2);
  const Image src = testutil::random_image(rng, 10, 7, 2);
  const CoordGrid g = random_grid(rng, 6, 5, 0.0, 9.0, 6.0);
  const SampledImage s = bilinear_sample(src, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    ASSERT_TRUE(s.valid[i]);
    for (int c = 0; c < 2; ++c) {
      EXPECT_NEAR(s.image.data[i * 2 + c], oracle(src, g.u[i], g.v[i], c), 1e-14);
    }
  }
}

TEST(Sampler, OutOfBoundsGivesZeroAndInvalid) {
  Image src(4, 4, 1, 0.7);
  CoordGrid g(4, 1);
  g.u = {-0.01, 3.0, 3.0001, 1.0};
  g.v = {1.0, 3.0, 1.0, -2.0};
  g.valid = {1, 1, 1, 1};
  const SampledImage s = bilinear_sample(src, g);
  EXPECT_EQ(s.valid, (ValidityMask{0, 1, 0, 0}));
  EXPECT_EQ(s.image.data[0], 0.0);
  EXPECT_EQ(s.image.data[1], 0.7);
  EXPECT_EQ(s.image.data[2], 0.0);
}

TEST(Sampler, InvalidGridEntriesStayInvalid) {
  Image src(4, 4, 1, 0.5);
  CoordGrid g = CoordGrid::identity(4, 4);
  g.valid[5] = 0;
  const SampledImage s = bilinear_sample(src, g);
  EXPECT_EQ(s.valid[5], 0);
  EXPECT_EQ(s.image.data[5], 0.0);
}

TEST(Sampler, OutputBoundedBySourceRange) {
  std::mt19937_64 rng(3);
  const Image src = testutil::random_image(rng, 9, 9, 1, 0.2, 0.6);
  const CoordGrid g = random_grid(rng, 20, 20, -1.0, 9.5, 9.5);
  const SampledImage s = bilinear_sample(src, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!s.valid[i]) continue;
    EXPECT_GE(s.image.data[i], 0.2 - 1e-15);
    EXPECT_LE(s.image.data[i], 0.6 + 1e-15);
  }
}

TEST(Sampler, VectorJacobianProductMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  Image src = testutil::random_image(rng, 8, 6, 3);
  CoordGrid g = random_grid(rng, 5, 4, 0.05, 6.9, 4.9);
  const Image up = testutil::random_image(rng, 5, 4, 3, -1, 1);
  auto objective = [&] { return testutil::dot(bilinear_sample(src, g).image.data, up.data); };
  const SampleGradients grad = bilinear_sample_vjp(src, g, up);
  for (std::size_t i = 0; i < g.size(); ++i) {
    // keep probes inside a bilinear cell
    if (std::abs(g.u[i] - std::round(g.u[i])) < 1e-4 || std::abs(g.v[i] - std::round(g.v[i])) < 1e-4) continue;
    EXPECT_NEAR(grad.u[i], testutil::central_difference(objective, g.u[i], 1e-6), 1e-8);
    EXPECT_NEAR(grad.v[i], testutil::central_difference(objective, g.v[i], 1e-6), 1e-8);
  }
  // the sample is linear in the source, so differences are exact up to rounding
  for (std::size_t j = 0; j < src.data.size(); ++j) {
    EXPECT_NEAR(grad.src.data[j], testutil::central_difference(objective, src.data[j], 1e-3), 1e-10);
  }
}
