#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "gncpose/errors.hpp"

namespace gncpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Pinhole camera without skew or distortion. Image quantities are pixels.
struct CameraIntrinsics {
  double fx = 600.0;
  double fy = 600.0;
  double cx = 320.0;
  double cy = 240.0;
  int image_width = 640;
  int image_height = 480;
};

inline CameraIntrinsics validate_intrinsics(const CameraIntrinsics& k) {
  if (!(k.fx > 0.0) || !std::isfinite(k.fx)) fail(ErrorKind::InvalidIntrinsics, "fx must be > 0");
  if (!(k.fy > 0.0) || !std::isfinite(k.fy)) fail(ErrorKind::InvalidIntrinsics, "fy must be > 0");
  if (!std::isfinite(k.cx)) fail(ErrorKind::InvalidIntrinsics, "cx must be finite");
  if (!std::isfinite(k.cy)) fail(ErrorKind::InvalidIntrinsics, "cy must be finite");
  if (k.image_width <= 0) fail(ErrorKind::InvalidIntrinsics, "image_width must be > 0");
  if (k.image_height <= 0) fail(ErrorKind::InvalidIntrinsics, "image_height must be > 0");
  return k;
}

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

/// Rodrigues' formula. A zero vector maps to the identity.
inline Mat3 exp_so3(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta < 1e-12) return Mat3::Identity() + skew(omega);
  return Eigen::AngleAxisd(theta, omega / theta).toRotationMatrix();
}

inline Vec3 log_so3(const Mat3& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.angle() * aa.axis();
}

/// Projects an arbitrary 3x3 matrix onto SO(3) (closest rotation in Frobenius norm).
inline Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

/// Rigid transform from the model frame into the camera frame: x_cam = R x + t.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }

  /// (this * other)(x) == this(other(x))
  Pose compose(const Pose& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  Pose inverse() const {
    const Mat3 rt = rotation.transpose();
    return {rt, -rt * translation};
  }

  bool is_valid(double tol = 1e-9) const {
    const Mat3 gram = rotation.transpose() * rotation;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    if (std::abs(rotation.determinant() - 1.0) > tol) return false;
    return rotation.allFinite() && translation.allFinite();
  }
};

inline Pose pose_from_axis_angle(const Vec3& axis_angle, const Vec3& translation) {
  return {exp_so3(axis_angle), translation};
}

/// Left-multiplicative update used by the solvers:
/// R' = Exp(dw) R, t' = Exp(dw) t + dt, with delta = (dw, dt).
inline Pose perturb_left(const Pose& pose, const Vec6& delta) {
  const Mat3 dr = exp_so3(delta.head<3>());
  return {nearest_rotation(dr * pose.rotation), dr * pose.translation + delta.tail<3>()};
}

inline double rotation_geodesic_error(const Pose& a, const Pose& b) {
  const double c = ((a.rotation.transpose() * b.rotation).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

struct Correspondence {
  Vec2 pixel = Vec2::Zero();
  Vec3 point = Vec3::Zero();
  /// Absent means "no prior", which is read as weight 1.
  std::optional<double> geom_weight;

  double weight() const { return geom_weight.value_or(1.0); }
};

/// Indices into this list are stable; every mask and index set downstream refers to them.
using CorrespondenceSet = std::vector<Correspondence>;
using IndexSet = std::vector<std::size_t>;

struct GncConfig {
  double kappa = 5.0;
  double epsilon = 1e-6;
  double gamma = 0.5;
  double mu_final = 0.5;
  double tau_gnc = 1e-3;
  double tau_geom = 0.3;
  int min_inliers = 6;
  int max_iterations = 100;
  /// Inner solver limits; defaults match iterative_pnp.
  int inner_max_iterations = 50;
  double inner_tolerance = 1e-10;
};

inline GncConfig validate(const GncConfig& cfg) {
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) fail(ErrorKind::InvalidConfig, "gamma must lie in (0, 1)");
  if (!(cfg.mu_final > 0.0)) fail(ErrorKind::InvalidConfig, "mu_final must be > 0");
  if (!(cfg.kappa > 0.0)) fail(ErrorKind::InvalidConfig, "kappa must be > 0");
  if (!(cfg.epsilon >= 0.0)) fail(ErrorKind::InvalidConfig, "epsilon must be >= 0");
  if (!(cfg.tau_gnc > 0.0 && cfg.tau_gnc < 1.0)) fail(ErrorKind::InvalidConfig, "tau_gnc must lie in (0, 1)");
  if (!(cfg.tau_geom >= 0.0 && cfg.tau_geom < 1.0)) fail(ErrorKind::InvalidConfig, "tau_geom must lie in [0, 1)");
  if (cfg.min_inliers < 4) fail(ErrorKind::InvalidConfig, "min_inliers must be >= 4");
  if (cfg.max_iterations < 1) fail(ErrorKind::InvalidConfig, "max_iterations must be >= 1");
  return cfg;
}

/// One outer GNC iteration, recorded after its inner solve.
struct GncIterationRecord {
  double mu = 0.0;
  IndexSet inlier_indices;
  Pose pose;
  /// Statistics of the residuals recomputed after the solve, over inlier_indices.
  double mean_residual = 0.0;
  double median_residual = 0.0;
};

struct PoseEstimate {
  Pose pose;
  std::vector<bool> inlier_mask;
  std::vector<GncIterationRecord> trace;
  bool converged = false;
  /// The robust initialization the outer loop started from.
  Pose initial_pose;
};

}  // namespace gncpose
