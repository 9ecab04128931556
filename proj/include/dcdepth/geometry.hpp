#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "dcdepth/image.hpp"

namespace dcdepth {

/// Pinhole camera. All quantities in pixels.
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;

  /// Intrinsics matching a 2x2 box-downsampled image.
  [[nodiscard]] Intrinsics halved() const;
};

/// 6-DoF rigid motion stored as (tx, ty, tz, rx, ry, rz): translation in
/// meters followed by an axis-angle rotation vector in radians.
///
/// A pose maps points from the coordinates of one camera (the target) into
/// the coordinates of another (the source); equivalently it is the pose of
/// the target camera expressed in the source camera's frame.
struct Pose6 {
  std::array<double, 6> v{};

  Pose6() = default;
  Pose6(double tx, double ty, double tz, double rx, double ry, double rz)
      : v{tx, ty, tz, rx, ry, rz} {}
  Pose6(const Eigen::Vector3d& t, const Eigen::Vector3d& r)
      : v{t.x(), t.y(), t.z(), r.x(), r.y(), r.z()} {}

  [[nodiscard]] Eigen::Vector3d translation() const { return {v[0], v[1], v[2]}; }
  [[nodiscard]] Eigen::Vector3d rotation() const { return {v[3], v[4], v[5]}; }
  [[nodiscard]] bool is_identity() const {
    for (double x : v) {
      if (x != 0.0) return false;
    }
    return true;
  }

  double& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
  bool operator==(const Pose6&) const = default;
};

/// Homogeneous 4x4 rigid transform.
struct RigidTransform {
  Eigen::Matrix4d matrix = Eigen::Matrix4d::Identity();

  [[nodiscard]] Eigen::Matrix3d rotation() const { return matrix.topLeftCorner<3, 3>(); }
  [[nodiscard]] Eigen::Vector3d translation() const { return matrix.topRightCorner<3, 1>(); }
  [[nodiscard]] Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation() * p + translation();
  }
  [[nodiscard]] RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const {
    return {matrix * rhs.matrix};
  }
};

struct Projection {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double depth = 0.0;
  bool valid = false;
};

/// Camera-frame point seen at `pixel` with z-depth `depth` (> 0).
Eigen::Vector3d backproject(const Eigen::Vector2d& pixel, double depth,
                            const Intrinsics& K);

/// Pinhole projection. `valid` is false for z <= 1e-12; the pixel is left at
/// zero in that case instead of dividing.
Projection project(const Eigen::Vector3d& point, const Intrinsics& K);

Eigen::Matrix3d skew(const Eigen::Vector3d& w);

/// Exponential map so(3) -> SO(3) (Rodrigues). Second-order series below
/// |r| = 1e-8.
Eigen::Matrix3d rodrigues(const Eigen::Vector3d& r);

/// Left Jacobian of SO(3): d(exp(r) p)/dr = -skew(exp(r) p) * J_l(r).
Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& r);

RigidTransform pose_to_transform(const Pose6& pose);

/// Inverse of pose_to_transform for rotations with angle below pi.
Pose6 transform_to_pose(const RigidTransform& transform);

/// Componentwise sum of two 6-vectors. Approximates the composition of two
/// motions when both rotations are small.
Pose6 compose_small(const Pose6& a, const Pose6& b);

/// Continuous source-image coordinates for every target pixel.
struct CoordGrid {
  int width = 0;
  int height = 0;
  std::vector<double> u;
  std::vector<double> v;
  ValidityMask valid;

  CoordGrid() = default;
  CoordGrid(int w, int h);

  /// The integer pixel grid, all valid.
  static CoordGrid identity(int w, int h);

  [[nodiscard]] std::size_t size() const { return u.size(); }
};

/// Inverse warp: for each target pixel, back-project with the target-view
/// depth, move the point into the source camera with `target_to_source`,
/// and project. Invalid where the point lands behind the source camera or
/// outside [0, W-1] x [0, H-1].
///
/// `depth` is single-channel with the dimensions of `K`, all values > 0.
CoordGrid warp_coordinates(const Image& depth, const Pose6& target_to_source,
                           const Intrinsics& K);

struct WarpGradients {
  Image depth;                 ///< d(loss)/d(depth), single channel
  std::array<double, 6> pose{};  ///< d(loss)/d(pose) in Pose6 ordering
};

/// Vector-Jacobian product of warp_coordinates. `grad_u`/`grad_v` are the
/// cotangents of the grid coordinates; invalid pixels contribute nothing.
WarpGradients warp_coordinates_vjp(const Image& depth,
                                   const Pose6& target_to_source,
                                   const Intrinsics& K, const CoordGrid& grid,
                                   const std::vector<double>& grad_u,
                                   const std::vector<double>& grad_v);

}  // namespace dcdepth
