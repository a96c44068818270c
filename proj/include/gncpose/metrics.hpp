#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "gncpose/types.hpp"

namespace gncpose {

inline constexpr double kDefaultAucMaxThreshold = 0.10;  // meters
inline constexpr std::size_t kExactDiameterMaxVertices = 2000;
inline constexpr std::size_t kDefaultMetricMaxVertices = 5000;

struct ModelPoints {
  std::vector<Vec3> vertices;
  double diameter = 0.0;
};

/// Exact max pairwise distance up to kExactDiameterMaxVertices vertices,
/// axis-aligned bounding-box diagonal beyond that.
inline double model_diameter(const std::vector<Vec3>& vertices) {
  if (vertices.empty()) fail(ErrorKind::EmptyModel, "model has no vertices");
  if (vertices.size() <= kExactDiameterMaxVertices) {
    double best = 0.0;
    for (std::size_t i = 0; i < vertices.size(); ++i)
      for (std::size_t j = i + 1; j < vertices.size(); ++j)
        best = std::max(best, (vertices[i] - vertices[j]).squaredNorm());
    return std::sqrt(best);
  }
  Vec3 lo = vertices.front();
  Vec3 hi = vertices.front();
  for (const Vec3& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

inline ModelPoints make_model_points(std::vector<Vec3> vertices, std::optional<double> diameter = std::nullopt) {
  if (vertices.empty()) fail(ErrorKind::EmptyModel, "model has no vertices");
  ModelPoints m;
  m.diameter = diameter ? *diameter : model_diameter(vertices);
  m.vertices = std::move(vertices);
  if (!(m.diameter > 0.0)) fail(ErrorKind::EmptyModel, "model diameter must be > 0");
  return m;
}

/// Deterministic stride subsampling down to at most max_vertices.
inline std::vector<Vec3> subsample_vertices(const std::vector<Vec3>& vertices, std::size_t max_vertices) {
  if (max_vertices == 0 || vertices.size() <= max_vertices) return vertices;
  const std::size_t stride = (vertices.size() + max_vertices - 1) / max_vertices;
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < vertices.size(); i += stride) out.push_back(vertices[i]);
  return out;
}

inline double add(const ModelPoints& model, const Pose& estimated, const Pose& truth,
                  std::size_t max_vertices = kDefaultMetricMaxVertices) {
  if (model.vertices.empty()) fail(ErrorKind::EmptyModel, "model has no vertices");
  const auto verts = subsample_vertices(model.vertices, max_vertices);
  double sum = 0.0;
  for (const Vec3& x : verts) sum += (estimated.apply(x) - truth.apply(x)).norm();
  return sum / static_cast<double>(verts.size());
}

/// Mean distance from each estimated-pose vertex to the nearest truth-pose vertex.
inline double add_s(const ModelPoints& model, const Pose& estimated, const Pose& truth,
                    std::size_t max_vertices = kDefaultMetricMaxVertices) {
  if (model.vertices.empty()) fail(ErrorKind::EmptyModel, "model has no vertices");
  const auto verts = subsample_vertices(model.vertices, max_vertices);
  std::vector<Vec3> target;
  target.reserve(verts.size());
  for (const Vec3& x : verts) target.push_back(truth.apply(x));
  double sum = 0.0;
  for (const Vec3& x : verts) {
    const Vec3 p = estimated.apply(x);
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : target) best = std::min(best, (p - q).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(verts.size());
}

namespace detail {
inline void check_errors(const std::vector<double>& errors) {
  if (errors.empty()) fail(ErrorKind::EmptyInput, "no errors given");
  for (double e : errors)
    if (std::isnan(e) || e < 0.0) fail(ErrorKind::DomainError, "errors must be non-negative");
}
}  // namespace detail

/// Area under accuracy(d) = |{e < d}| / n over d in (0, T], divided by T.
/// Each error e contributes the interval (e, T] exactly, so the integral is
/// sum(max(0, T - e)) / n.
inline double auc(std::vector<double> errors, double max_threshold = kDefaultAucMaxThreshold) {
  detail::check_errors(errors);
  if (!(max_threshold > 0.0)) fail(ErrorKind::DomainError, "max_threshold must be > 0");
  std::sort(errors.begin(), errors.end());
  double area = 0.0;
  for (double e : errors) {
    if (e >= max_threshold) break;
    area += max_threshold - e;
  }
  return area / (static_cast<double>(errors.size()) * max_threshold);
}

inline double accuracy_at(const std::vector<double>& errors, double threshold) {
  detail::check_errors(errors);
  if (!(threshold > 0.0)) fail(ErrorKind::DomainError, "threshold must be > 0");
  const auto below = std::count_if(errors.begin(), errors.end(), [&](double e) { return e < threshold; });
  return static_cast<double>(below) / static_cast<double>(errors.size());
}

struct MetricReport {
  double add = 0.0;
  double add_s = 0.0;
  double add_auc = 0.0;
  double add_s_auc = 0.0;
  bool add_below_0_1d = false;
  bool add_s_below_0_1d = false;
};

/// Single-pose report. The AUC fields use the absolute max_threshold.
inline MetricReport evaluate(const ModelPoints& model, const Pose& estimated, const Pose& truth,
                             double max_threshold = kDefaultAucMaxThreshold,
                             std::size_t max_vertices = kDefaultMetricMaxVertices) {
  MetricReport m;
  m.add = add(model, estimated, truth, max_vertices);
  m.add_s = add_s(model, estimated, truth, max_vertices);
  m.add_auc = auc({m.add}, max_threshold);
  m.add_s_auc = auc({m.add_s}, max_threshold);
  m.add_below_0_1d = m.add < 0.1 * model.diameter;
  m.add_s_below_0_1d = m.add_s < 0.1 * model.diameter;
  return m;
}

}  // namespace gncpose
