#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace gncpose;
using namespace gncpose::testing;

namespace {

std::size_t count_true(const std::vector<bool>& m) { return static_cast<std::size_t>(std::count(m.begin(), m.end(), true)); }

SceneConfig clustered(std::uint64_t seed) {
  SceneConfig cfg;
  cfg.rng_seed = seed;
  cfg.cluster_spec = ClusterSpec{4, 0.01, 0.1};
  return cfg;
}

}  // namespace

TEST(Generate, CleanSceneReprojectsExactly) {
  const auto s = scene(1);
  for (const auto& c : s.correspondences) EXPECT_LT((project(s.intrinsics, s.truth, c.point) - c.pixel).norm(), 1e-9);
  EXPECT_EQ(count_true(s.outlier_truth_mask), 0u);
}

TEST(Generate, ExactOutlierCount) {
  EXPECT_EQ(count_true(scene(2, 0.5).outlier_truth_mask), 50u);
  EXPECT_EQ(count_true(scene(2, 0.29).outlier_truth_mask), 29u);
  EXPECT_EQ(count_true(scene(2, 0.333, 0.0, 120).outlier_truth_mask), 39u);
}

TEST(Generate, InliersWithinTruncatedNoise) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = scene(seed, 0.3, 1.5);
    for (std::size_t i = 0; i < s.correspondences.size(); ++i) {
      if (s.outlier_truth_mask[i]) continue;
      const auto& c = s.correspondences[i];
      EXPECT_LE((project(s.intrinsics, s.truth, c.point) - c.pixel).norm(), 6.0 * 1.5 + 1e-9);
    }
  }
}

TEST(Generate, PointsFramedInFrontOfCamera) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = scene(seed);
    EXPECT_TRUE(s.truth.is_valid());
    for (const auto& c : s.correspondences) {
      const Vec3 pc = s.truth.apply(c.point);
      EXPECT_GT(pc.z(), 0.0);
      const Vec2 uv = project(s.intrinsics, s.truth, c.point);
      EXPECT_TRUE(uv.x() >= 0 && uv.x() < 640 && uv.y() >= 0 && uv.y() < 480);
    }
  }
}

TEST(Generate, Deterministic) {
  const auto a = scene(42, 0.4, 1.0);
  const auto b = scene(42, 0.4, 1.0);
  EXPECT_EQ(a.truth.rotation, b.truth.rotation);
  EXPECT_EQ(a.outlier_truth_mask, b.outlier_truth_mask);
  for (std::size_t i = 0; i < a.correspondences.size(); ++i) EXPECT_EQ(a.correspondences[i].pixel, b.correspondences[i].pixel);
  const auto c = scene(43, 0.4, 1.0);
  EXPECT_NE(a.truth.rotation, c.truth.rotation);
}

TEST(Generate, ClusterPointsOutweighBackground) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = generate(clustered(seed));
    const auto w = compute_weights(s.correspondences, {0.005, 0.2});
    double cl = 0, bg = 0;
    int ncl = 0, nbg = 0;
    for (std::size_t i = 0; i < w.weight.size(); ++i) {
      if (s.background_mask[i]) {
        bg += w.weight[i];
        ++nbg;
      } else {
        cl += w.weight[i];
        ++ncl;
      }
    }
    ASSERT_EQ(nbg, 10);
    EXPECT_GT(cl / ncl, bg / nbg) << "seed " << seed;
  }
}

TEST(Generate, BackgroundTargetOnlyTouchesBackground) {
  SceneConfig cfg = clustered(3);
  cfg.cluster_spec->background_fraction = 0.5;
  cfg.outlier_fraction = 0.4;
  cfg.outlier_target = OutlierTarget::Background;
  for (auto model : {OutlierModel::UniformPixel, OutlierModel::WrongAssociation, OutlierModel::RepeatedPattern}) {
    cfg.outlier_model = model;
    const auto s = generate(cfg);
    EXPECT_EQ(count_true(s.outlier_truth_mask), 40u);
    for (std::size_t i = 0; i < s.correspondences.size(); ++i)
      if (s.outlier_truth_mask[i]) EXPECT_TRUE(s.background_mask[i]);
  }
  cfg.outlier_fraction = 0.6;
  EXPECT_THROW(generate(cfg), Error);
}

TEST(Generate, WrongAssociationPermutesObservedPixels) {
  for (int outliers : {10, 11}) {
    SceneConfig cfg;
    cfg.rng_seed = 5;
    cfg.outlier_fraction = outliers / 100.0;
    cfg.outlier_model = OutlierModel::WrongAssociation;
    const auto s = generate(cfg);
    cfg.outlier_fraction = 0.0;
    const auto clean = generate(cfg);
    std::vector<std::pair<double, double>> before, after;
    for (std::size_t i = 0; i < s.correspondences.size(); ++i) {
      if (!s.outlier_truth_mask[i]) continue;
      before.emplace_back(clean.correspondences[i].pixel.x(), clean.correspondences[i].pixel.y());
      after.emplace_back(s.correspondences[i].pixel.x(), s.correspondences[i].pixel.y());
      EXPECT_NE(s.correspondences[i].pixel, clean.correspondences[i].pixel);
    }
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    EXPECT_EQ(before, after);
  }
}

TEST(Generate, NearestPairingSwapsLocally) {
  SceneConfig cfg;
  cfg.rng_seed = 6;
  cfg.n_points = 200;
  cfg.outlier_fraction = 0.4;
  cfg.outlier_model = OutlierModel::WrongAssociation;
  const auto random = generate(cfg);
  cfg.swap_pairing = SwapPairing::Nearest;
  const auto nearest = generate(cfg);
  cfg.outlier_fraction = 0.0;
  const auto clean = generate(cfg);
  ASSERT_EQ(nearest.outlier_truth_mask, random.outlier_truth_mask);
  std::vector<std::pair<double, double>> before, after;
  double shift_random = 0, shift_nearest = 0;
  for (std::size_t i = 0; i < clean.correspondences.size(); ++i) {
    if (!nearest.outlier_truth_mask[i]) continue;
    before.emplace_back(clean.correspondences[i].pixel.x(), clean.correspondences[i].pixel.y());
    after.emplace_back(nearest.correspondences[i].pixel.x(), nearest.correspondences[i].pixel.y());
    shift_random += (random.correspondences[i].pixel - clean.correspondences[i].pixel).norm();
    shift_nearest += (nearest.correspondences[i].pixel - clean.correspondences[i].pixel).norm();
  }
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  EXPECT_EQ(before, after);
  EXPECT_LT(shift_nearest, 0.5 * shift_random);
}

// With sigma = 0 every outlier ray passes through R (X_i + d) + t for one
// shared offset d; the cross-product constraints are linear in d.
TEST(Generate, RepeatedPatternIsConsistentShift) {
  SceneConfig cfg;
  cfg.rng_seed = 9;
  cfg.outlier_fraction = 0.3;
  cfg.outlier_model = OutlierModel::RepeatedPattern;
  cfg.pattern_period = 0.01;
  const auto s = generate(cfg);
  ASSERT_EQ(count_true(s.outlier_truth_mask), 30u);
  Eigen::MatrixXd a(3 * 30, 3);
  Eigen::VectorXd b(3 * 30);
  int row = 0;
  for (std::size_t i = 0; i < s.correspondences.size(); ++i) {
    if (!s.outlier_truth_mask[i]) continue;
    const auto& c = s.correspondences[i];
    const Vec3 ray((c.pixel.x() - s.intrinsics.cx) / s.intrinsics.fx, (c.pixel.y() - s.intrinsics.cy) / s.intrinsics.fy, 1.0);
    a.block<3, 3>(row, 0) = skew(ray) * s.truth.rotation;
    b.segment<3>(row) = -skew(ray) * s.truth.apply(c.point);
    row += 3;
    EXPECT_GT(residual(s.intrinsics, s.truth, c), 1.0);
  }
  const Vec3 d = a.colPivHouseholderQr().solve(b);
  EXPECT_NEAR(d.norm(), 0.01, 1e-9);
  EXPECT_LT((a * d - b).norm(), 1e-9);
}

TEST(Generate, LoadedModelSource) {
  std::vector<Vec3> verts;
  for (int i = 0; i < 50; ++i) verts.emplace_back(0.002 * i - 0.05, 0.001 * (i % 7), 0.003 * (i % 5));
  SceneConfig cfg;
  cfg.point_source = LoadedModel{make_model_points(verts)};
  cfg.n_points = 30;
  const auto s = generate(cfg);
  EXPECT_EQ(s.model_points.vertices.size(), 50u);
  for (const auto& c : s.correspondences)
    EXPECT_TRUE(std::any_of(verts.begin(), verts.end(), [&](const Vec3& v) { return v == c.point; }));
}

TEST(Generate, InvalidConfigs) {
  SceneConfig cfg;
  cfg.z_min = 0.0;
  EXPECT_THROW(generate(cfg), Error);
  cfg = {};
  cfg.outlier_fraction = 0.95;
  EXPECT_THROW(generate(cfg), Error);
  cfg = {};
  cfg.n_points = 3;
  EXPECT_THROW(generate(cfg), Error);
  cfg = {};
  cfg.point_source = LoadedModel{make_model_points({Vec3::Zero(), Vec3::UnitX()})};
  cfg.cluster_spec = ClusterSpec{};
  EXPECT_THROW(generate(cfg), Error);
}

TEST(Corrupt, ZeroIsIdentity) {
  const auto s = scene(7, 0.1, 1.0);
  const auto t = corrupt(s, 0.0, 1);
  EXPECT_EQ(t.outlier_truth_mask, s.outlier_truth_mask);
  for (std::size_t i = 0; i < s.correspondences.size(); ++i) EXPECT_EQ(t.correspondences[i].pixel, s.correspondences[i].pixel);
}

TEST(Corrupt, TwoStepsMatchOneStepCount) {
  const auto s = scene(8);
  const auto twice = corrupt(corrupt(s, 0.2, 1), 0.2, 2);
  const auto once = corrupt(s, 0.4, 3);
  EXPECT_EQ(count_true(twice.outlier_truth_mask), count_true(once.outlier_truth_mask));
  EXPECT_EQ(count_true(once.outlier_truth_mask), 40u);
  EXPECT_DOUBLE_EQ(once.config.outlier_fraction, 0.4);
}

TEST(Corrupt, AllPointsRejected) {
  const auto s = scene(9);
  try {
    corrupt(s, 1.0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidConfig);
  }
}

TEST(Corrupt, OnlyTouchesCleanPoints) {
  const auto s = scene(10, 0.3);
  const auto t = corrupt(s, 0.2, 4);
  for (std::size_t i = 0; i < s.correspondences.size(); ++i)
    if (s.outlier_truth_mask[i]) EXPECT_TRUE(t.outlier_truth_mask[i]);
  EXPECT_EQ(count_true(t.outlier_truth_mask), 50u);
}

TEST(Generate, MeanDepthInsideRange) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const double d = mean_scene_depth(scene(seed));
    EXPECT_GT(d, 0.5 - 0.2);
    EXPECT_LT(d, 1.0 + 0.2);
  }
}
