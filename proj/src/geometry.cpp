#include "dcdepth/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Geometry>

namespace dcdepth {

void Intrinsics::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("intrinsics: " + what);
  };
  if (!(fx > 0.0) || !std::isfinite(fx)) fail("fx must be positive");
  if (!(fy > 0.0) || !std::isfinite(fy)) fail("fy must be positive");
  if (width < 2) fail("width must be at least 2");
  if (height < 2) fail("height must be at least 2");
  if (!(cx >= 0.0 && cx < width)) fail("cx must lie in [0, width)");
  if (!(cy >= 0.0 && cy < height)) fail("cy must lie in [0, height)");
}

Intrinsics Intrinsics::halved() const {
  // a coarse pixel centre sits halfway between two fine pixel centres
  return {fx * 0.5, fy * 0.5, (cx + 0.5) * 0.5 - 0.5, (cy + 0.5) * 0.5 - 0.5,
          width / 2, height / 2};
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  const Eigen::Matrix3d rt = rotation().transpose();
  out.matrix.topLeftCorner<3, 3>() = rt;
  out.matrix.topRightCorner<3, 1>() = -rt * translation();
  return out;
}

Eigen::Vector3d backproject(const Eigen::Vector2d& pixel, double depth,
                            const Intrinsics& K) {
  if (!(depth > 0.0)) {
    throw std::invalid_argument("backproject: depth must be positive, got " +
                                std::to_string(depth));
  }
  return {(pixel.x() - K.cx) * depth / K.fx, (pixel.y() - K.cy) * depth / K.fy,
          depth};
}

Projection project(const Eigen::Vector3d& point, const Intrinsics& K) {
  Projection out;
  out.depth = point.z();
  if (!(point.z() > 1e-12)) {
    return out;
  }
  out.pixel = {K.fx * point.x() / point.z() + K.cx,
               K.fy * point.y() / point.z() + K.cy};
  out.valid = true;
  return out;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  // clang-format off
  s <<     0.0, -w.z(),  w.y(),
         w.z(),    0.0, -w.x(),
        -w.y(),  w.x(),    0.0;
  // clang-format on
  return s;
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& r) {
  const double theta2 = r.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a;
  double b;
  if (theta < 1e-8) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Eigen::Matrix3d k = skew(r);
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& r) {
  const double theta2 = r.squaredNorm();
  const double theta = std::sqrt(theta2);
  double b;
  double c;
  // (theta - sin theta) / theta^3 cancels badly well above 1e-8
  if (theta < 1e-4) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Eigen::Matrix3d k = skew(r);
  return Eigen::Matrix3d::Identity() + b * k + c * k * k;
}

RigidTransform pose_to_transform(const Pose6& pose) {
  RigidTransform out;
  out.matrix.topLeftCorner<3, 3>() = rodrigues(pose.rotation());
  out.matrix.topRightCorner<3, 1>() = pose.translation();
  return out;
}

Pose6 transform_to_pose(const RigidTransform& transform) {
  const Eigen::AngleAxisd aa(transform.rotation());
  return {transform.translation(), aa.angle() * aa.axis()};
}

Pose6 compose_small(const Pose6& a, const Pose6& b) {
  Pose6 out;
  for (int i = 0; i < 6; ++i) out[i] = a[i] + b[i];
  return out;
}

CoordGrid::CoordGrid(int w, int h)
    : width(w),
      height(h),
      u(static_cast<std::size_t>(w) * h, 0.0),
      v(static_cast<std::size_t>(w) * h, 0.0),
      valid(static_cast<std::size_t>(w) * h, 0) {}

CoordGrid CoordGrid::identity(int w, int h) {
  CoordGrid g(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      g.u[i] = x;
      g.v[i] = y;
      g.valid[i] = 1;
    }
  }
  return g;
}

namespace {

void check_depth_map(const Image& depth, const Intrinsics& K, const char* who) {
  if (depth.channels != 1 || depth.width != K.width || depth.height != K.height) {
    throw std::invalid_argument(std::string(who) +
                                ": depth map must be single-channel with the "
                                "intrinsics' dimensions");
  }
  for (double d : depth.data) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw std::invalid_argument(std::string(who) +
                                  ": depth values must be positive and finite");
    }
  }
}

}  // namespace

CoordGrid warp_coordinates(const Image& depth, const Pose6& target_to_source,
                           const Intrinsics& K) {
  check_depth_map(depth, K, "warp_coordinates");
  if (target_to_source.is_identity()) {
    return CoordGrid::identity(K.width, K.height);
  }

  const Eigen::Matrix3d R = rodrigues(target_to_source.rotation());
  const Eigen::Vector3d t = target_to_source.translation();
  const double max_u = K.width - 1;
  const double max_v = K.height - 1;

  CoordGrid grid(K.width, K.height);
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * K.width + x;
      const Eigen::Vector3d p = backproject({x, y}, depth.data[i], K);
      const Projection proj = project(R * p + t, K);
      if (!proj.valid) continue;
      grid.u[i] = proj.pixel.x();
      grid.v[i] = proj.pixel.y();
      grid.valid[i] = proj.pixel.x() >= 0.0 && proj.pixel.x() <= max_u &&
                      proj.pixel.y() >= 0.0 && proj.pixel.y() <= max_v;
    }
  }
  return grid;
}

WarpGradients warp_coordinates_vjp(const Image& depth,
                                   const Pose6& target_to_source,
                                   const Intrinsics& K, const CoordGrid& grid,
                                   const std::vector<double>& grad_u,
                                   const std::vector<double>& grad_v) {
  check_depth_map(depth, K, "warp_coordinates_vjp");
  const std::size_t n = depth.pixels();
  if (grid.size() != n || grad_u.size() != n || grad_v.size() != n) {
    throw std::invalid_argument("warp_coordinates_vjp: size mismatch");
  }

  const Eigen::Matrix3d R = rodrigues(target_to_source.rotation());
  const Eigen::Matrix3d Jl = so3_left_jacobian(target_to_source.rotation());
  const Eigen::Vector3d t = target_to_source.translation();

  WarpGradients out;
  out.depth = Image(K.width, K.height, 1);
  Eigen::Vector3d grad_t = Eigen::Vector3d::Zero();
  Eigen::Vector3d grad_rot_point = Eigen::Vector3d::Zero();
  // grad_r = J_l^T * sum_i (R p_i) x gY_i, so accumulate the cross products
  // first and apply J_l^T once

  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * K.width + x;
      if (!grid.valid[i]) continue;
      const double gu = grad_u[i];
      const double gv = grad_v[i];
      if (gu == 0.0 && gv == 0.0) continue;

      const double d = depth.data[i];
      const Eigen::Vector3d ray((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
      const Eigen::Vector3d rotated_ray = R * ray;
      const Eigen::Vector3d rotated_point = d * rotated_ray;
      const Eigen::Vector3d q = rotated_point + t;
      const double inv_z = 1.0 / q.z();

      Eigen::Vector3d gq;
      gq.x() = gu * K.fx * inv_z;
      gq.y() = gv * K.fy * inv_z;
      gq.z() = -(gu * K.fx * q.x() + gv * K.fy * q.y()) * inv_z * inv_z;

      out.depth.data[i] = gq.dot(rotated_ray);
      grad_t += gq;
      grad_rot_point += rotated_point.cross(gq);
    }
  }

  const Eigen::Vector3d grad_r = Jl.transpose() * grad_rot_point;
  for (int k = 0; k < 3; ++k) {
    out.pose[static_cast<std::size_t>(k)] = grad_t[k];
    out.pose[static_cast<std::size_t>(k) + 3] = grad_r[k];
  }
  return out;
}

}  // namespace dcdepth
