#pragma once

#include <limits>
#include <vector>

#include "gncpose/types.hpp"

namespace gncpose {

inline constexpr double kDefaultDepthEpsilon = 1e-6;

/// Squared pixel reprojection error per correspondence. Points that land
/// behind the camera carry +infinity.
using ResidualVector = std::vector<double>;
using Mat26 = Eigen::Matrix<double, 2, 6>;

inline Vec2 project_camera_point(const CameraIntrinsics& k, const Vec3& pc,
                                 double depth_epsilon = kDefaultDepthEpsilon) {
  if (!(pc.z() > depth_epsilon)) fail(ErrorKind::BehindCamera, "camera-frame depth below epsilon");
  return {k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy};
}

inline Vec2 project(const CameraIntrinsics& k, const Pose& pose, const Vec3& point,
                    double depth_epsilon = kDefaultDepthEpsilon) {
  return project_camera_point(k, pose.apply(point), depth_epsilon);
}

inline double residual(const CameraIntrinsics& k, const Pose& pose, const Correspondence& c,
                       double depth_epsilon = kDefaultDepthEpsilon) {
  const Vec3 pc = pose.apply(c.point);
  if (!(pc.z() > depth_epsilon)) return std::numeric_limits<double>::infinity();
  const Vec2 uv{k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy};
  return (uv - c.pixel).squaredNorm();
}

inline ResidualVector residuals(const CameraIntrinsics& k, const Pose& pose, const CorrespondenceSet& c,
                                double depth_epsilon = kDefaultDepthEpsilon) {
  ResidualVector r(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) r[i] = residual(k, pose, c[i], depth_epsilon);
  return r;
}

/// d(projection)/d(delta) for the left perturbation in perturb_left().
/// Since the observed pixel is constant this is also the Jacobian of the
/// 2-vector reprojection error.
inline Mat26 residual_jacobian(const CameraIntrinsics& k, const Pose& pose, const Vec3& point,
                               double depth_epsilon = kDefaultDepthEpsilon) {
  const Vec3 pc = pose.apply(point);
  if (!(pc.z() > depth_epsilon)) fail(ErrorKind::BehindCamera, "camera-frame depth below epsilon");
  const double iz = 1.0 / pc.z();
  Eigen::Matrix<double, 2, 3> d_proj;
  d_proj << k.fx * iz, 0.0, -k.fx * pc.x() * iz * iz,
            0.0, k.fy * iz, -k.fy * pc.y() * iz * iz;
  Mat26 j;
  j.leftCols<3>() = -d_proj * skew(pc);
  j.rightCols<3>() = d_proj;
  return j;
}

}  // namespace gncpose
