#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gncpose/errors.hpp"

// Geman-McClure graduated non-convexity. Residuals are squared pixel errors
// and mu carries squared-pixel units; the score squares the residual again,
// so its cutoff is in fourth-power pixel units.

namespace gncpose {

/// Current non-convexity level of one GNC run.
struct GncState {
  double mu = 1.0;
  int iteration = 0;
};

namespace detail {
inline void check_loss_domain(double r, double mu) {
  if (std::isnan(r) || r < 0.0) fail(ErrorKind::DomainError, "residual must be >= 0");
  if (!(mu > 0.0)) fail(ErrorKind::DomainError, "mu must be > 0");
}
}  // namespace detail

/// rho_mu(r) = r / (r + mu)
inline double gm_surrogate(double r, double mu) {
  detail::check_loss_domain(r, mu);
  if (std::isinf(r)) return 1.0;
  return r / (r + mu);
}

/// psi_mu(r) = d rho_mu / dr = mu / (r + mu)^2
inline double gm_influence(double r, double mu) {
  detail::check_loss_domain(r, mu);
  if (std::isinf(r)) return 0.0;
  const double s = r + mu;
  return mu / (s * s);
}

/// Soft inlier score mu^2 / (r^2 + mu^2), in [0, 1].
inline double gnc_score(double r, double mu) {
  detail::check_loss_domain(r, mu);
  if (std::isinf(r)) return 0.0;
  const double q = r / mu;
  return 1.0 / (1.0 + q * q);
}

/// Median over the finite entries; even counts average the two middle values.
inline double finite_median(const std::vector<double>& values) {
  std::vector<double> finite;
  finite.reserve(values.size());
  for (double v : values)
    if (std::isfinite(v)) finite.push_back(v);
  if (finite.empty()) fail(ErrorKind::NoFiniteResiduals, "no finite residuals");
  const std::size_t n = finite.size();
  const std::size_t mid = n / 2;
  std::nth_element(finite.begin(), finite.begin() + mid, finite.end());
  const double upper = finite[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(finite.begin(), finite.begin() + mid);
  return 0.5 * (lower + upper);
}

/// mu_0 = kappa * median(r) + epsilon, with infinite residuals ignored.
inline double initial_mu(const std::vector<double>& residuals, double kappa, double epsilon) {
  if (residuals.empty()) fail(ErrorKind::NoFiniteResiduals, "empty residual vector");
  return kappa * finite_median(residuals) + epsilon;
}

inline double anneal_mu(double mu, double gamma, double mu_final) {
  return std::max(gamma * mu, mu_final);
}

}  // namespace gncpose
