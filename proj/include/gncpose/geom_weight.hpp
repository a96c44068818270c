#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "gncpose/types.hpp"

namespace gncpose {

struct VoxelGridConfig {
  double voxel_size = 0.005;
  double w_min = 0.2;
};

inline VoxelGridConfig validate(const VoxelGridConfig& cfg) {
  if (!(cfg.voxel_size > 0.0) || !std::isfinite(cfg.voxel_size))
    fail(ErrorKind::InvalidConfig, "voxel_size must be > 0");
  if (!(cfg.w_min >= 0.0 && cfg.w_min < 1.0)) fail(ErrorKind::InvalidConfig, "w_min must lie in [0, 1)");
  return cfg;
}

using VoxelIndex = std::array<std::int64_t, 3>;

struct GeometryWeights {
  std::vector<int> support;
  std::vector<double> weight;
};

/// floor(point / voxel_size), rounding toward -infinity. The grid is anchored at the model origin.
inline VoxelIndex voxel_index(const Vec3& point, double voxel_size) {
  if (!(voxel_size > 0.0)) fail(ErrorKind::DomainError, "voxel_size must be > 0");
  return {static_cast<std::int64_t>(std::floor(point.x() / voxel_size)),
          static_cast<std::int64_t>(std::floor(point.y() / voxel_size)),
          static_cast<std::int64_t>(std::floor(point.z() / voxel_size))};
}

struct VoxelIndexHash {
  std::size_t operator()(const VoxelIndex& g) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::int64_t c : g) {
      h ^= static_cast<std::uint64_t>(c) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

/// Support s_i = number of points sharing point i's voxel (itself included);
/// w_i = w_min + (1 - w_min) * s_i / max_j s_j.
inline GeometryWeights compute_weights(const std::vector<Vec3>& points, const VoxelGridConfig& cfg) {
  validate(cfg);
  if (points.empty()) fail(ErrorKind::EmptyInput, "no points to weight");

  std::vector<VoxelIndex> cells;
  cells.reserve(points.size());
  std::unordered_map<VoxelIndex, int, VoxelIndexHash> counts;
  counts.reserve(points.size());
  for (const Vec3& p : points) {
    cells.push_back(voxel_index(p, cfg.voxel_size));
    ++counts[cells.back()];
  }

  GeometryWeights out;
  out.support.reserve(points.size());
  int s_max = 0;
  for (const VoxelIndex& g : cells) {
    out.support.push_back(counts.at(g));
    s_max = std::max(s_max, out.support.back());
  }
  out.weight.reserve(points.size());
  for (int s : out.support) {
    if (s == s_max) {
      out.weight.push_back(1.0);
      continue;
    }
    const double normalized = static_cast<double>(s) / static_cast<double>(s_max);
    out.weight.push_back(cfg.w_min + (1.0 - cfg.w_min) * normalized);
  }
  return out;
}

inline GeometryWeights compute_weights(const CorrespondenceSet& c, const VoxelGridConfig& cfg) {
  std::vector<Vec3> points;
  points.reserve(c.size());
  for (const auto& item : c) points.push_back(item.point);
  return compute_weights(points, cfg);
}

}  // namespace gncpose
