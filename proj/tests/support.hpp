#pragma once

#include <random>

#include "gncpose/gncpose.hpp"

namespace gncpose::testing {

inline CameraIntrinsics default_k() { return CameraIntrinsics{}; }

inline Pose random_pose(std::mt19937_64& rng, double depth = 1.0) {
  std::normal_distribution<double> n;
  const Vec3 w(n(rng), n(rng), n(rng));
  return pose_from_axis_angle(w, Vec3(0.05 * n(rng), 0.05 * n(rng), depth));
}

inline SyntheticScene scene(std::uint64_t seed, double outliers = 0.0, double sigma = 0.0, int n = 100) {
  SceneConfig cfg;
  cfg.rng_seed = seed;
  cfg.n_points = n;
  cfg.outlier_fraction = outliers;
  cfg.pixel_noise_sigma = sigma;
  return generate(cfg);
}

inline IndexSet all_indices(std::size_t n) {
  IndexSet out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

inline IndexSet clean_indices(const SyntheticScene& s) {
  IndexSet out;
  for (std::size_t i = 0; i < s.correspondences.size(); ++i)
    if (!s.outlier_truth_mask[i]) out.push_back(i);
  return out;
}

inline double deg(double rad) { return rad * 180.0 / 3.14159265358979323846; }

}  // namespace gncpose::testing
