#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "gncpose/projection.hpp"
#include "gncpose/random.hpp"

namespace gncpose {

enum class MinimalSolver { P3P, DLT };

struct RansacConfig {
  int max_iterations = 1000;
  /// Unsquared pixel error below which a correspondence supports a hypothesis.
  double inlier_threshold = 8.0;
  MinimalSolver solver = MinimalSolver::P3P;
  /// P3P uses three points plus one to pick among its roots; DLT needs six.
  int sample_size = 4;
  double confidence = 0.99;
  std::uint64_t rng_seed = 0;
  /// Maximum consensus -> refit rounds after sampling.
  int refit_rounds = 5;
};

inline RansacConfig validate(const RansacConfig& cfg) {
  if (cfg.max_iterations < 1) fail(ErrorKind::InvalidConfig, "ransac max_iterations must be >= 1");
  if (!(cfg.inlier_threshold > 0.0)) fail(ErrorKind::InvalidConfig, "inlier_threshold must be > 0");
  const int minimal = cfg.solver == MinimalSolver::P3P ? 4 : 6;
  if (cfg.sample_size < minimal) fail(ErrorKind::InvalidConfig, "sample_size below the minimal solver's requirement");
  if (!(cfg.confidence > 0.0 && cfg.confidence < 1.0))
    fail(ErrorKind::InvalidConfig, "confidence must lie in (0, 1)");
  return cfg;
}

struct SolveReport {
  Pose pose;
  int iterations_used = 0;
  /// Sum of squared pixel errors over the solved subset (RANSAC: over the final consensus set).
  double final_cost = 0.0;
  /// Filled by ransac_pnp only.
  std::vector<bool> inlier_mask;
};

struct IterativeOptions {
  int max_iterations = 50;
  /// Stop once the relative cost decrease of an accepted step falls below this.
  double tolerance = 1e-10;
};

struct LmOptions {
  int max_iterations = 100;
  double initial_damping = 1e-3;
  double tolerance = 1e-12;
  double max_damping = 1e16;
};

namespace detail {

using Mat6 = Eigen::Matrix<double, 6, 6>;

struct NormalEquations {
  Mat6 hessian = Mat6::Zero();
  Vec6 gradient = Vec6::Zero();
};

inline void check_subset(const CorrespondenceSet& c, std::span<const std::size_t> subset) {
  if (subset.size() < 4) fail(ErrorKind::TooFewCorrespondences, "need at least 4 correspondences in the subset");
  for (std::size_t i : subset)
    if (i >= c.size()) fail(ErrorKind::DomainError, "subset index out of range");
}

inline double subset_cost(const CameraIntrinsics& k, const Pose& pose, const CorrespondenceSet& c,
                          std::span<const std::size_t> subset) {
  double cost = 0.0;
  for (std::size_t i : subset) cost += residual(k, pose, c[i]);
  return cost;
}

inline NormalEquations build_normal_equations(const CameraIntrinsics& k, const Pose& pose,
                                              const CorrespondenceSet& c,
                                              std::span<const std::size_t> subset) {
  NormalEquations ne;
  for (std::size_t i : subset) {
    const Mat26 j = residual_jacobian(k, pose, c[i].point);
    const Vec2 e = project(k, pose, c[i].point) - c[i].pixel;
    ne.hessian.noalias() += j.transpose() * j;
    ne.gradient.noalias() += j.transpose() * e;
  }
  return ne;
}

/// Solves (H + damping * D) x = -g with D = diag(H), each entry floored at
/// 1e-12 * max(1, max diag(H)).
inline std::optional<Vec6> damped_step(const NormalEquations& ne, double damping) {
  Mat6 a = ne.hessian;
  const double floor = 1e-12 * std::max(1.0, ne.hessian.diagonal().maxCoeff());
  for (int d = 0; d < 6; ++d) a(d, d) += damping * std::max(ne.hessian(d, d), floor);
  Eigen::LDLT<Mat6> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
  Vec6 step = ldlt.solve(-ne.gradient);
  if (!step.allFinite()) return std::nullopt;
  return step;
}

}  // namespace detail

/// Direct linear transform on the 3x4 projection matrix in normalized image
/// coordinates, with the rotation block projected onto SO(3). Needs at least
/// six points; returns nullopt for degenerate configurations.
inline std::optional<Pose> dlt_pose(const CameraIntrinsics& k, const CorrespondenceSet& c,
                                    std::span<const std::size_t> subset) {
  const std::size_t n = subset.size();
  if (n < 6) return std::nullopt;

  Vec3 centroid = Vec3::Zero();
  for (std::size_t i : subset) centroid += c[i].point;
  centroid /= static_cast<double>(n);
  double mean_dist = 0.0;
  for (std::size_t i : subset) mean_dist += (c[i].point - centroid).norm();
  mean_dist /= static_cast<double>(n);
  if (!(mean_dist > 0.0)) return std::nullopt;
  const double scale = std::sqrt(3.0) / mean_dist;

  Eigen::MatrixXd a(2 * n, 12);
  for (std::size_t row = 0; row < n; ++row) {
    const Correspondence& item = c[subset[row]];
    const Eigen::Vector4d xh((scale * (item.point - centroid)).homogeneous());
    const double x = (item.pixel.x() - k.cx) / k.fx;
    const double y = (item.pixel.y() - k.cy) / k.fy;
    a.row(2 * row) << xh.transpose(), Eigen::RowVector4d::Zero(), -x * xh.transpose();
    a.row(2 * row + 1) << Eigen::RowVector4d::Zero(), xh.transpose(), -y * xh.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd v = svd.matrixV().col(11);
  if (!v.allFinite()) return std::nullopt;

  Eigen::Matrix<double, 3, 4> p_norm;
  p_norm << v.segment<4>(0).transpose(), v.segment<4>(4).transpose(), v.segment<4>(8).transpose();
  // Undo the point normalization X' = scale * (X - centroid).
  Mat3 m = scale * p_norm.leftCols<3>();
  Vec3 p = p_norm.col(3) - m * centroid;
  const double det = m.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-300) return std::nullopt;
  if (det < 0.0) {
    m = -m;
    p = -p;
  }
  const Mat3 r = nearest_rotation(m);
  const double lambda = (r.transpose() * m).trace() / 3.0;
  if (!(lambda > 0.0)) return std::nullopt;
  Pose pose{r, p / lambda};
  for (std::size_t i : subset)
    if (!(pose.apply(c[i].point).z() > kDefaultDepthEpsilon)) return std::nullopt;
  return pose;
}

namespace detail {

/// Coefficients lowest degree first.
using Poly = std::vector<double>;

inline Poly poly_mul(const Poly& a, const Poly& b) {
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

inline Poly poly_add(Poly a, const Poly& b, double scale = 1.0) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) a[i] += scale * b[i];
  return a;
}

inline double poly_eval(const Poly& p, double x) {
  double acc = 0.0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * x + *it;
  return acc;
}

/// Real roots via companion-matrix eigenvalues, each polished by a few Newton steps.
inline std::vector<double> real_roots(Poly p) {
  while (p.size() > 1 && std::abs(p.back()) < 1e-14 * std::abs(p.front()) + 1e-300) p.pop_back();
  const int degree = static_cast<int>(p.size()) - 1;
  std::vector<double> roots;
  if (degree < 1) return roots;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int i = 0; i < degree; ++i) companion(0, i) = -p[degree - 1 - i] / p[degree];
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  Poly dp(degree);
  for (int i = 1; i <= degree; ++i) dp[i - 1] = i * p[i];
  for (int i = 0; i < degree; ++i) {
    const auto z = es.eigenvalues()[i];
    if (std::abs(z.imag()) > 1e-6 * std::max(1.0, std::abs(z.real()))) continue;
    double x = z.real();
    for (int it = 0; it < 3; ++it) {
      const double d = poly_eval(dp, x);
      if (d == 0.0) break;
      x -= poly_eval(p, x) / d;
    }
    roots.push_back(x);
  }
  return roots;
}

/// Rigid transform q = R p + t from three or more point pairs (Kabsch).
inline Pose align_points(const std::vector<Vec3>& model, const std::vector<Vec3>& camera) {
  Vec3 mc = Vec3::Zero();
  Vec3 cc = Vec3::Zero();
  for (std::size_t i = 0; i < model.size(); ++i) {
    mc += model[i];
    cc += camera[i];
  }
  mc /= static_cast<double>(model.size());
  cc /= static_cast<double>(model.size());
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < model.size(); ++i) h += (camera[i] - cc) * (model[i] - mc).transpose();
  const Mat3 r = nearest_rotation(h);
  return {r, cc - r * mc};
}

}  // namespace detail

/// Grunert's P3P: depths s_i along the bearings f_i satisfy the three
/// law-of-cosines constraints between the model points. With u = s2/s1 and
/// v = s3/s1 one constraint difference is linear in u, which reduces the
/// system to a quartic in v. Returns up to four poses.
inline std::vector<Pose> p3p_poses(const CameraIntrinsics& k, const std::array<Vec3, 3>& points,
                                   const std::array<Vec2, 3>& pixels) {
  std::array<Vec3, 3> f;
  for (int i = 0; i < 3; ++i)
    f[i] = Vec3((pixels[i].x() - k.cx) / k.fx, (pixels[i].y() - k.cy) / k.fy, 1.0).normalized();
  const double a2 = (points[1] - points[2]).squaredNorm();
  const double b2 = (points[0] - points[2]).squaredNorm();
  const double c2 = (points[0] - points[1]).squaredNorm();
  std::vector<Pose> out;
  if (!(a2 > 0.0 && b2 > 0.0 && c2 > 0.0)) return out;
  const double ca = f[1].dot(f[2]);
  const double cb = f[0].dot(f[2]);
  const double cg = f[0].dot(f[1]);

  // u = N(v) / D(v)
  const double q = (a2 - c2) / b2;
  const detail::Poly num{1.0 + q, -2.0 * q * cb, q - 1.0};
  const detail::Poly den{2.0 * cg, -2.0 * ca};
  // b^2 (D^2 + N^2 - 2 cg N D) - c^2 (1 - 2 cb v + v^2) D^2 = 0
  const detail::Poly dd = detail::poly_mul(den, den);
  detail::Poly lhs = detail::poly_add(dd, detail::poly_mul(num, num));
  lhs = detail::poly_add(lhs, detail::poly_mul(num, den), -2.0 * cg);
  detail::Poly quartic = detail::poly_add(detail::Poly(lhs.size(), 0.0), lhs, b2);
  quartic = detail::poly_add(quartic, detail::poly_mul(detail::Poly{1.0, -2.0 * cb, 1.0}, dd), -c2);

  const std::vector<Vec3> model(points.begin(), points.end());
  for (double v : detail::real_roots(quartic)) {
    if (!(v > 0.0)) continue;
    const double d = detail::poly_eval(den, v);
    if (std::abs(d) < 1e-12) continue;
    const double u = detail::poly_eval(num, v) / d;
    if (!(u > 0.0)) continue;
    const double denom = 1.0 + v * v - 2.0 * v * cb;
    if (!(denom > 0.0)) continue;
    const double s1 = std::sqrt(b2 / denom);
    const std::vector<Vec3> cam{s1 * f[0], u * s1 * f[1], v * s1 * f[2]};
    const Pose pose = detail::align_points(model, cam);
    if (pose.rotation.allFinite() && pose.translation.allFinite()) out.push_back(pose);
  }
  return out;
}

/// P3P on the first three indices; the remaining ones pick the root with the
/// smallest reprojection error.
inline std::optional<Pose> p3p_pose(const CameraIntrinsics& k, const CorrespondenceSet& c,
                                    std::span<const std::size_t> subset) {
  if (subset.size() < 4) return std::nullopt;
  const std::array<Vec3, 3> pts{c[subset[0]].point, c[subset[1]].point, c[subset[2]].point};
  const std::array<Vec2, 3> pix{c[subset[0]].pixel, c[subset[1]].pixel, c[subset[2]].pixel};
  std::optional<Pose> best;
  double best_err = std::numeric_limits<double>::infinity();
  for (const Pose& pose : p3p_poses(k, pts, pix)) {
    double err = 0.0;
    for (std::size_t s = 3; s < subset.size(); ++s) err += residual(k, pose, c[subset[s]]);
    if (err < best_err) {
      best_err = err;
      best = pose;
    }
  }
  return best;
}

/// Damped Gauss-Newton on the unweighted sum of squared pixel errors over
/// `subset`. Only cost-decreasing steps are accepted.
inline SolveReport iterative_pnp(const CameraIntrinsics& k, const CorrespondenceSet& c,
                                 std::span<const std::size_t> subset, const Pose& initial,
                                 const IterativeOptions& opts = {}) {
  detail::check_subset(c, subset);
  double cost = detail::subset_cost(k, initial, c, subset);
  if (!std::isfinite(cost)) fail(ErrorKind::NumericalFailure, "initial pose puts subset points behind the camera");

  SolveReport report{initial, 0, cost, {}};
  for (int iter = 0; iter < opts.max_iterations && cost > 0.0; ++iter) {
    report.iterations_used = iter + 1;
    const auto ne = detail::build_normal_equations(k, report.pose, c, subset);
    bool accepted = false;
    bool any_step = false;
    double new_cost = cost;
    Pose candidate;
    // Pure Gauss-Newton first, then increasingly damped retries.
    for (double damping = 0.0; damping <= 1e8; damping = (damping == 0.0 ? 1e-6 : damping * 10.0)) {
      const auto step = detail::damped_step(ne, damping);
      if (!step) continue;
      any_step = true;
      candidate = perturb_left(report.pose, *step);
      new_cost = detail::subset_cost(k, candidate, c, subset);
      if (new_cost <= cost) {
        accepted = true;
        break;
      }
    }
    if (!any_step && iter == 0) fail(ErrorKind::NumericalFailure, "normal equations are singular");
    if (!accepted) break;
    const double decrease = cost - new_cost;
    report.pose = candidate;
    cost = new_cost;
    if (decrease <= opts.tolerance * std::max(cost + decrease, std::numeric_limits<double>::min())) break;
  }
  report.final_cost = cost;
  return report;
}

/// Levenberg-Marquardt with multiplicative damping (x10 on rejection, /10 on acceptance).
inline SolveReport refine_lm(const CameraIntrinsics& k, const CorrespondenceSet& c,
                             std::span<const std::size_t> subset, const Pose& initial,
                             const LmOptions& opts = {}) {
  detail::check_subset(c, subset);
  double cost = detail::subset_cost(k, initial, c, subset);
  if (!std::isfinite(cost)) fail(ErrorKind::NumericalFailure, "subset contains a non-finite residual");

  SolveReport report{initial, 0, cost, {}};
  double damping = opts.initial_damping;
  bool have_equations = false;
  detail::NormalEquations ne;
  for (int iter = 0; iter < opts.max_iterations && cost > 0.0; ++iter) {
    report.iterations_used = iter + 1;
    if (!have_equations) {
      ne = detail::build_normal_equations(k, report.pose, c, subset);
      if (!ne.hessian.allFinite() || !ne.gradient.allFinite())
        fail(ErrorKind::NumericalFailure, "non-finite normal equations");
      have_equations = true;
    }
    const auto step = detail::damped_step(ne, damping);
    if (!step) {
      damping *= 10.0;
      if (damping > opts.max_damping) break;
      continue;
    }
    const Pose candidate = perturb_left(report.pose, *step);
    const double new_cost = detail::subset_cost(k, candidate, c, subset);
    if (new_cost < cost) {
      const double decrease = cost - new_cost;
      report.pose = candidate;
      cost = new_cost;
      have_equations = false;
      damping = std::max(damping / 10.0, 1e-15);
      if (decrease <= opts.tolerance * (cost + decrease)) break;
    } else {
      damping *= 10.0;
      if (damping > opts.max_damping) break;
    }
  }
  report.final_cost = cost;
  return report;
}

namespace detail {

inline std::vector<bool> consensus_mask(const CameraIntrinsics& k, const Pose& pose, const CorrespondenceSet& c,
                                        double threshold, int& count) {
  const double thr2 = threshold * threshold;
  std::vector<bool> mask(c.size(), false);
  count = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (residual(k, pose, c[i]) < thr2) {
      mask[i] = true;
      ++count;
    }
  }
  return mask;
}

inline IndexSet mask_to_indices(const std::vector<bool>& mask) {
  IndexSet out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(i);
  return out;
}

}  // namespace detail

/// Minimal-sample RANSAC around p3p_pose() or dlt_pose(), followed by iterative refits on
/// the consensus set. Deterministic for a fixed rng_seed.
inline SolveReport ransac_pnp(const CameraIntrinsics& k, const CorrespondenceSet& c, const RansacConfig& cfg) {
  validate(cfg);
  const std::size_t n = c.size();
  const auto sample_size = static_cast<std::size_t>(cfg.sample_size);
  if (n < sample_size) fail(ErrorKind::TooFewCorrespondences, "fewer correspondences than the minimal sample");
  for (const auto& item : c)
    if (!item.pixel.allFinite() || !item.point.allFinite())
      fail(ErrorKind::DomainError, "correspondence with non-finite coordinates");

  auto rng = seeded_rng(cfg.rng_seed, 1);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::vector<std::size_t> sample(sample_size);

  int best_count = -1;
  Pose best_pose;
  std::vector<bool> best_mask;
  int needed = cfg.max_iterations;
  int drawn = 0;
  const double log_fail = std::log(1.0 - cfg.confidence);

  while (drawn < needed) {
    ++drawn;
    // Partial Fisher-Yates over the index pool.
    for (std::size_t s = 0; s < sample_size; ++s) {
      std::uniform_int_distribution<std::size_t> pick(s, n - 1);
      std::swap(pool[s], pool[pick(rng)]);
      sample[s] = pool[s];
    }
    const auto hypothesis =
        cfg.solver == MinimalSolver::P3P ? p3p_pose(k, c, sample) : dlt_pose(k, c, sample);
    if (!hypothesis) continue;
    int count = 0;
    auto mask = detail::consensus_mask(k, *hypothesis, c, cfg.inlier_threshold, count);
    if (count > best_count) {
      best_count = count;
      best_pose = *hypothesis;
      best_mask = std::move(mask);
      const double ratio = static_cast<double>(count) / static_cast<double>(n);
      const double all_good = std::pow(ratio, static_cast<double>(sample_size));
      if (all_good >= 1.0 - 1e-15) {
        needed = std::min(needed, drawn);
      } else if (all_good > 0.0) {
        const double est = std::ceil(log_fail / std::log1p(-all_good));
        if (est < static_cast<double>(needed)) needed = std::max(drawn, static_cast<int>(est));
      }
    }
  }
  if (best_count < cfg.sample_size) fail(ErrorKind::NoConsensus, "best hypothesis has too small a consensus set");

  SolveReport report{best_pose, drawn, 0.0, best_mask};
  int count = best_count;
  for (int round = 0; round < cfg.refit_rounds; ++round) {
    const IndexSet consensus = detail::mask_to_indices(report.inlier_mask);
    Pose refit;
    try {
      refit = iterative_pnp(k, c, consensus, report.pose).pose;
    } catch (const Error&) {
      break;
    }
    int new_count = 0;
    auto new_mask = detail::consensus_mask(k, refit, c, cfg.inlier_threshold, new_count);
    if (new_count < count) {
      // Keep the refit only if it solved on the set it was fitted to.
      report.pose = refit;
      break;
    }
    const bool unchanged = new_mask == report.inlier_mask;
    report.pose = refit;
    report.inlier_mask = std::move(new_mask);
    count = new_count;
    if (unchanged) break;
  }
  const IndexSet final_set = detail::mask_to_indices(report.inlier_mask);
  report.final_cost = detail::subset_cost(k, report.pose, c, final_set);
  return report;
}

}  // namespace gncpose
