#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dcdepth/image.hpp"

namespace dcdepth::testutil {

inline Image random_image(std::mt19937_64& rng, int w, int h, int c, double lo = 0.0,
                          double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Image img(w, h, c);
  for (double& v : img.data) v = dist(rng);
  return img;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> out(n);
  for (double& v : out) v = dist(rng);
  return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Central difference of f along one coordinate.
template <typename F>
double central_difference(F&& f, double& x, double eps) {
  const double saved = x;
  x = saved + eps;
  const double plus = f();
  x = saved - eps;
  const double minus = f();
  x = saved;
  return (plus - minus) / (2.0 * eps);
}

}  // namespace dcdepth::testutil
