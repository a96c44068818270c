#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "gncpose/metrics.hpp"
#include "gncpose/projection.hpp"
#include "gncpose/random.hpp"

namespace gncpose {

/// RepeatedPattern matches each outlier to the twin feature one pattern
/// period away: pixel = project(truth, X + d) with a single random offset d
/// of length pattern_period per injection.
enum class OutlierModel { UniformPixel, WrongAssociation, RepeatedPattern };

/// How WrongAssociation picks swap partners: uniformly at random, or each
/// unpaired outlier with its nearest unpaired neighbour in the image.
enum class SwapPairing { Random, Nearest };

/// Which correspondences outlier injection may touch.
enum class OutlierTarget { Any, Background };

struct UniformBox {
  double extent = 0.2;  // edge length in meters, centered on the model origin
};

struct LoadedModel {
  ModelPoints model;
};

using PointSource = std::variant<UniformBox, LoadedModel>;

/// Dense clusters inside the box plus a uniform background. Cluster points
/// come first in the correspondence list, background points after them.
struct ClusterSpec {
  int n_clusters = 4;
  double cluster_radius = 0.01;
  double background_fraction = 0.1;
};

struct SceneConfig {
  int n_points = 100;
  PointSource point_source = UniformBox{};
  double z_min = 0.5;
  double z_max = 1.0;
  double pixel_noise_sigma = 0.0;
  double outlier_fraction = 0.0;
  OutlierModel outlier_model = OutlierModel::UniformPixel;
  double pattern_period = 0.008;  // meters, RepeatedPattern only
  SwapPairing swap_pairing = SwapPairing::Random;  // WrongAssociation only
  OutlierTarget outlier_target = OutlierTarget::Any;
  std::optional<ClusterSpec> cluster_spec;
  CameraIntrinsics intrinsics;
  int min_inliers = 6;
  std::uint64_t rng_seed = 0;
};

struct SyntheticScene {
  CameraIntrinsics intrinsics;
  Pose truth;
  CorrespondenceSet correspondences;
  std::vector<bool> outlier_truth_mask;
  /// True for background points of a clustered scene; all false otherwise.
  std::vector<bool> background_mask;
  ModelPoints model_points;
  SceneConfig config;
};

namespace detail {

inline constexpr double kNoiseTruncation = 6.0;
inline constexpr int kPoseAttempts = 1000;

/// floor(fraction * n), tolerant of the representation error in e.g. 0.29 * 100.
inline std::size_t floor_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Haar-uniform rotation from a normalized 4D Gaussian quaternion.
inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(n01(rng), n01(rng), n01(rng), n01(rng));
  } while (q.norm() < 1e-9);
  q.normalize();
  return q.toRotationMatrix();
}

inline Vec3 random_in_ball(std::mt19937_64& rng, double radius) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vec3 dir;
  do {
    dir = Vec3(n01(rng), n01(rng), n01(rng));
  } while (dir.norm() < 1e-12);
  return dir.normalized() * radius * std::cbrt(uniform(rng, 0.0, 1.0));
}

inline Vec2 truncated_noise(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return Vec2::Zero();
  std::normal_distribution<double> noise(0.0, sigma);
  Vec2 n;
  do {
    n = Vec2(noise(rng), noise(rng));
  } while (n.norm() > kNoiseTruncation * sigma);
  return n;
}

inline bool inside_image(const CameraIntrinsics& k, const Vec2& uv) {
  return uv.x() >= 0.0 && uv.y() >= 0.0 && uv.x() < k.image_width && uv.y() < k.image_height;
}

inline Vec2 random_pixel(std::mt19937_64& rng, const CameraIntrinsics& k) {
  return {uniform(rng, 0.0, k.image_width), uniform(rng, 0.0, k.image_height)};
}

/// Draws `count` distinct entries of `eligible` (partial Fisher-Yates).
inline IndexSet sample_without_replacement(std::mt19937_64& rng, IndexSet eligible, std::size_t count) {
  for (std::size_t s = 0; s < count; ++s) {
    std::uniform_int_distribution<std::size_t> pick(s, eligible.size() - 1);
    std::swap(eligible[s], eligible[pick(rng)]);
  }
  eligible.resize(count);
  return eligible;
}

/// Swaps the 2D observations pairwise in draw order. With an odd count the
/// last three form a cycle, so every chosen correspondence ends up with
/// another one's pixel.
inline void swap_pairs(const IndexSet& chosen, CorrespondenceSet& c) {
  const std::size_t n = chosen.size();
  const std::size_t paired = (n % 2 == 0) ? n : n - 3;
  for (std::size_t s = 0; s < paired; s += 2) std::swap(c[chosen[s]].pixel, c[chosen[s + 1]].pixel);
  if (n % 2 == 1) {
    const Vec2 first = c[chosen[n - 3]].pixel;
    c[chosen[n - 3]].pixel = c[chosen[n - 2]].pixel;
    c[chosen[n - 2]].pixel = c[chosen[n - 1]].pixel;
    c[chosen[n - 1]].pixel = first;
  }
}

/// Greedy nearest-neighbour ordering of the chosen indices by current pixel,
/// so that swap_pairs() exchanges observations of nearby features.
inline IndexSet nearest_pair_order(const IndexSet& chosen, const CorrespondenceSet& c) {
  IndexSet order;
  order.reserve(chosen.size());
  std::vector<bool> used(chosen.size(), false);
  for (std::size_t a = 0; a < chosen.size(); ++a) {
    if (used[a]) continue;
    used[a] = true;
    order.push_back(chosen[a]);
    std::size_t best = chosen.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < chosen.size(); ++b) {
      if (used[b]) continue;
      const double d = (c[chosen[a]].pixel - c[chosen[b]].pixel).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = b;
      }
    }
    if (best == chosen.size()) break;
    used[best] = true;
    order.push_back(chosen[best]);
  }
  return order;
}

/// Corrupts exactly the given indices. A single wrong association has no
/// partner to swap with and falls back to a uniform pixel.
inline void inject_outliers(std::mt19937_64& rng, const CameraIntrinsics& k, const Pose& truth,
                            const SceneConfig& cfg, const IndexSet& chosen, CorrespondenceSet& c,
                            std::vector<bool>& outlier_mask) {
  if (chosen.empty()) return;
  if (cfg.outlier_model == OutlierModel::RepeatedPattern) {
    std::normal_distribution<double> normal;
    Vec3 d(normal(rng), normal(rng), normal(rng));
    d = d.normalized() * cfg.pattern_period;
    for (std::size_t i : chosen) {
      const Vec3 pc = truth.apply(c[i].point + d);
      c[i].pixel = pc.z() > kDefaultDepthEpsilon
                       ? project_camera_point(k, pc) + truncated_noise(rng, cfg.pixel_noise_sigma)
                       : random_pixel(rng, k);
    }
  } else if (cfg.outlier_model == OutlierModel::UniformPixel || chosen.size() == 1) {
    for (std::size_t i : chosen) c[i].pixel = random_pixel(rng, k);
  } else {
    swap_pairs(cfg.swap_pairing == SwapPairing::Nearest ? nearest_pair_order(chosen, c) : chosen, c);
  }
  for (std::size_t i : chosen) outlier_mask[i] = true;
}

inline void check_scene_config(const SceneConfig& cfg) {
  validate_intrinsics(cfg.intrinsics);
  if (cfg.n_points < 4) fail(ErrorKind::InvalidConfig, "n_points must be >= 4");
  if (!(cfg.z_min > 0.0) || !(cfg.z_max >= cfg.z_min)) fail(ErrorKind::InvalidConfig, "need 0 < z_min <= z_max");
  if (!(cfg.pixel_noise_sigma >= 0.0)) fail(ErrorKind::InvalidConfig, "pixel_noise_sigma must be >= 0");
  if (!(cfg.pattern_period > 0.0)) fail(ErrorKind::InvalidConfig, "pattern_period must be > 0");
  if (!(cfg.outlier_fraction >= 0.0 && cfg.outlier_fraction < 1.0))
    fail(ErrorKind::InvalidConfig, "outlier_fraction must lie in [0, 1)");
  const auto n = static_cast<std::size_t>(cfg.n_points);
  const std::size_t outliers = floor_count(cfg.outlier_fraction, n);
  const auto floor_inliers = static_cast<std::size_t>(std::max(4, cfg.min_inliers));
  if (n - outliers < floor_inliers) fail(ErrorKind::InvalidConfig, "too few inliers would remain");
  if (const auto* box = std::get_if<UniformBox>(&cfg.point_source); box && !(box->extent > 0.0))
    fail(ErrorKind::InvalidConfig, "box extent must be > 0");
  if (const auto* loaded = std::get_if<LoadedModel>(&cfg.point_source); loaded && loaded->model.vertices.empty())
    fail(ErrorKind::InvalidConfig, "loaded model has no vertices");
  if (cfg.cluster_spec) {
    const ClusterSpec& cs = *cfg.cluster_spec;
    if (!std::holds_alternative<UniformBox>(cfg.point_source))
      fail(ErrorKind::InvalidConfig, "clusters are only supported for the uniform-box source");
    if (cs.n_clusters < 1) fail(ErrorKind::InvalidConfig, "n_clusters must be >= 1");
    if (!(cs.cluster_radius > 0.0)) fail(ErrorKind::InvalidConfig, "cluster_radius must be > 0");
    if (!(cs.background_fraction >= 0.0 && cs.background_fraction < 1.0))
      fail(ErrorKind::InvalidConfig, "background_fraction must lie in [0, 1)");
  }
  if (cfg.outlier_target == OutlierTarget::Background) {
    const std::size_t background = cfg.cluster_spec ? floor_count(cfg.cluster_spec->background_fraction, n) : 0;
    if (outliers > background) fail(ErrorKind::InvalidConfig, "more outliers requested than background points");
  }
}

}  // namespace detail

/// Seeded synthetic PnP scene: sample model points, a Haar-random pose that
/// frames them with the centroid in the central 60% of the image, truncated
/// Gaussian pixel noise, then exactly floor(outlier_fraction * n) outliers.
inline SyntheticScene generate(const SceneConfig& cfg) {
  detail::check_scene_config(cfg);
  auto rng = seeded_rng(cfg.rng_seed, 2);
  const auto n = static_cast<std::size_t>(cfg.n_points);
  const CameraIntrinsics& k = cfg.intrinsics;

  SyntheticScene scene;
  scene.config = cfg;
  scene.intrinsics = k;
  scene.background_mask.assign(n, false);

  std::vector<Vec3> points;
  points.reserve(n);
  if (const auto* box = std::get_if<UniformBox>(&cfg.point_source)) {
    const double h = box->extent / 2.0;
    if (cfg.cluster_spec) {
      const ClusterSpec& cs = *cfg.cluster_spec;
      const std::size_t n_background = detail::floor_count(cs.background_fraction, n);
      const double hc = std::max(0.0, h - cs.cluster_radius);
      std::vector<Vec3> centers;
      for (int c = 0; c < cs.n_clusters; ++c)
        centers.emplace_back(detail::uniform(rng, -hc, hc), detail::uniform(rng, -hc, hc), detail::uniform(rng, -hc, hc));
      for (std::size_t i = 0; i < n - n_background; ++i)
        points.push_back(centers[i % centers.size()] + detail::random_in_ball(rng, cs.cluster_radius));
      for (std::size_t i = 0; i < n_background; ++i) {
        points.emplace_back(detail::uniform(rng, -h, h), detail::uniform(rng, -h, h), detail::uniform(rng, -h, h));
        scene.background_mask[n - n_background + i] = true;
      }
    } else {
      for (std::size_t i = 0; i < n; ++i)
        points.emplace_back(detail::uniform(rng, -h, h), detail::uniform(rng, -h, h), detail::uniform(rng, -h, h));
    }
    scene.model_points = make_model_points(points);
  } else {
    const ModelPoints& model = std::get<LoadedModel>(cfg.point_source).model;
    std::uniform_int_distribution<std::size_t> pick(0, model.vertices.size() - 1);
    for (std::size_t i = 0; i < n; ++i) points.push_back(model.vertices[pick(rng)]);
    scene.model_points = model;
  }

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(n);

  bool framed = false;
  for (int attempt = 0; attempt < detail::kPoseAttempts && !framed; ++attempt) {
    const Mat3 r = detail::random_rotation(rng);
    const double z = detail::uniform(rng, cfg.z_min, cfg.z_max);
    const double u = detail::uniform(rng, 0.2 * k.image_width, 0.8 * k.image_width);
    const double v = detail::uniform(rng, 0.2 * k.image_height, 0.8 * k.image_height);
    const Vec3 center_cam(z * (u - k.cx) / k.fx, z * (v - k.cy) / k.fy, z);
    scene.truth = Pose{r, center_cam - r * centroid};
    framed = std::all_of(points.begin(), points.end(), [&](const Vec3& p) {
      const Vec3 pc = scene.truth.apply(p);
      return pc.z() > kDefaultDepthEpsilon && detail::inside_image(k, project_camera_point(k, pc));
    });
  }
  if (!framed) fail(ErrorKind::InvalidConfig, "could not frame the points inside the image; check depth range");

  scene.correspondences.reserve(n);
  for (const Vec3& p : points) {
    Correspondence item;
    item.point = p;
    item.pixel = project(k, scene.truth, p) + detail::truncated_noise(rng, cfg.pixel_noise_sigma);
    scene.correspondences.push_back(item);
  }

  scene.outlier_truth_mask.assign(n, false);
  IndexSet eligible;
  for (std::size_t i = 0; i < n; ++i)
    if (cfg.outlier_target == OutlierTarget::Any || scene.background_mask[i]) eligible.push_back(i);
  const IndexSet chosen =
      detail::sample_without_replacement(rng, eligible, detail::floor_count(cfg.outlier_fraction, n));
  detail::inject_outliers(rng, k, scene.truth, cfg, chosen, scene.correspondences, scene.outlier_truth_mask);
  return scene;
}

/// Adds floor(additional_fraction * n) further outliers among the currently
/// clean correspondences, using the scene's outlier model.
inline SyntheticScene corrupt(const SyntheticScene& scene, double additional_fraction, std::uint64_t rng_seed) {
  if (!(additional_fraction >= 0.0 && additional_fraction <= 1.0))
    fail(ErrorKind::InvalidConfig, "additional_fraction must lie in [0, 1]");
  const std::size_t n = scene.correspondences.size();
  IndexSet clean;
  for (std::size_t i = 0; i < n; ++i)
    if (!scene.outlier_truth_mask[i]) clean.push_back(i);
  const std::size_t extra = detail::floor_count(additional_fraction, n);
  if (extra > clean.size() || clean.size() - extra < 4) fail(ErrorKind::InvalidConfig, "fewer than 4 inliers would remain");

  SyntheticScene out = scene;
  if (extra == 0) return out;
  auto rng = seeded_rng(rng_seed, 3);
  const IndexSet chosen = detail::sample_without_replacement(rng, clean, extra);
  detail::inject_outliers(rng, out.intrinsics, out.truth, out.config, chosen, out.correspondences,
                          out.outlier_truth_mask);
  out.config.outlier_fraction = static_cast<double>(std::count(out.outlier_truth_mask.begin(),
                                                               out.outlier_truth_mask.end(), true)) /
                                static_cast<double>(n);
  return out;
}

/// Mean camera-frame depth of the model points under the true pose.
inline double mean_scene_depth(const SyntheticScene& scene) {
  double sum = 0.0;
  for (const auto& item : scene.correspondences) sum += scene.truth.apply(item.point).z();
  return sum / static_cast<double>(scene.correspondences.size());
}

}  // namespace gncpose
