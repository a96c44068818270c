#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "gncpose/pnp.hpp"
#include "gncpose/robust_loss.hpp"

namespace gncpose {

/// { i : gnc_score(r_i, mu) > tau_gnc and w_geom_i > tau_geom }, strict on both.
inline IndexSet select_inliers(std::span<const double> residuals, std::span<const double> geom_weights, double mu,
                               double tau_gnc, double tau_geom) {
  if (residuals.size() != geom_weights.size())
    fail(ErrorKind::LengthMismatch, "residuals and geometry weights differ in length");
  IndexSet out;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    if (gnc_score(residuals[i], mu) > tau_gnc && geom_weights[i] > tau_geom) out.push_back(i);
  }
  return out;
}

namespace detail {

inline void residual_stats(const ResidualVector& r, const IndexSet& subset, double& mean, double& median) {
  std::vector<double> values;
  values.reserve(subset.size());
  for (std::size_t i : subset) values.push_back(r[i]);
  mean = values.empty() ? 0.0 : std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  median = values.empty() ? 0.0 : finite_median(values);
}

inline std::vector<bool> indices_to_mask(const IndexSet& indices, std::size_t n) {
  std::vector<bool> mask(n, false);
  for (std::size_t i : indices) mask[i] = true;
  return mask;
}

}  // namespace detail

/// Graduated non-convexity PnP with geometry-gated inlier selection.
///
/// RANSAC initializes the pose, mu starts at kappa * median(r) + epsilon and
/// is annealed by gamma down to mu_final. Every outer iteration selects the
/// inlier set at the current mu, re-solves the pose on it with the
/// unweighted iterative solver, and recomputes all residuals. The pass at
/// mu == mu_final runs before the loop exits. A final LM refinement runs on
/// the last selected set.
///
/// If the very first selection is below min_inliers the RANSAC pose and its
/// consensus mask are returned with converged = false. A later breakout
/// refines the last successful pose on the last successful set, also with
/// converged = false.
inline PoseEstimate gnc_pnp(const CameraIntrinsics& k, const CorrespondenceSet& c,
                            std::span<const double> geom_weights, const GncConfig& cfg,
                            const RansacConfig& ransac_cfg) {
  validate(cfg);
  if (geom_weights.size() != c.size())
    fail(ErrorKind::LengthMismatch, "one geometry weight per correspondence is required");
  if (c.size() < static_cast<std::size_t>(cfg.min_inliers))
    fail(ErrorKind::TooFewCorrespondences, "fewer correspondences than min_inliers");

  SolveReport init;
  try {
    init = ransac_pnp(k, c, ransac_cfg);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::TooFewCorrespondences) throw;
    fail(ErrorKind::InitializationFailed, e.what());
  }

  PoseEstimate out;
  out.initial_pose = init.pose;
  out.pose = init.pose;
  out.inlier_mask = init.inlier_mask;

  ResidualVector r = residuals(k, init.pose, c);
  double mu = std::max(initial_mu(r, cfg.kappa, cfg.epsilon), cfg.mu_final);

  const IterativeOptions inner{cfg.inner_max_iterations, cfg.inner_tolerance};
  const auto min_inliers = static_cast<std::size_t>(cfg.min_inliers);
  IndexSet last_set;
  Pose pose = init.pose;
  bool converged = false;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    IndexSet selected = select_inliers(r, geom_weights, mu, cfg.tau_gnc, cfg.tau_geom);
    if (selected.size() < min_inliers) break;

    try {
      pose = iterative_pnp(k, c, selected, pose, inner).pose;
    } catch (const Error&) {
      break;
    }
    r = residuals(k, pose, c);

    GncIterationRecord record{mu, selected, pose, 0.0, 0.0};
    detail::residual_stats(r, selected, record.mean_residual, record.median_residual);
    out.trace.push_back(std::move(record));
    last_set = std::move(selected);

    if (mu <= cfg.mu_final) {
      converged = true;
      break;
    }
    mu = anneal_mu(mu, cfg.gamma, cfg.mu_final);
  }

  if (out.trace.empty()) {
    out.converged = false;
    return out;
  }

  try {
    out.pose = refine_lm(k, c, last_set, pose).pose;
  } catch (const Error&) {
    out.pose = pose;
  }
  out.inlier_mask = detail::indices_to_mask(last_set, c.size());
  out.converged = converged;
  return out;
}

/// Ablation arm: every geometry weight is 1, so only the GNC score gates.
inline PoseEstimate gnc_pnp_unweighted(const CameraIntrinsics& k, const CorrespondenceSet& c, const GncConfig& cfg,
                                       const RansacConfig& ransac_cfg) {
  const std::vector<double> ones(c.size(), 1.0);
  return gnc_pnp(k, c, ones, cfg, ransac_cfg);
}

}  // namespace gncpose
