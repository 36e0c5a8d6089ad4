#pragma once

// Power-law perturbation kernel p_r(x|y) ∝ (|x-y|^2 + r^2)^{-(N+D)/2}, its
// radius law, exact samplers, and the prior at r_max.

#include <cmath>
#include <numbers>
#include <random>

#include "pfgmpp/rng.hpp"
#include "pfgmpp/types.hpp"

namespace pfgmpp {

inline double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

/// Unnormalized log kernel. In Gaussian mode the anchor is sigma.
inline double kernel_log_unnorm(const Vector& x, const Vector& y, double r, const SpaceConfig& space) {
  check_dim(x, space.n(), "kernel_log_unnorm x");
  check_dim(y, space.n(), "kernel_log_unnorm y");
  require(r > 0.0, "kernel_log_unnorm: r must be > 0");
  const double d2 = (x - y).squaredNorm();
  if (space.is_gaussian()) return -d2 / (2.0 * r * r);
  return -space.half_total() * std::log(d2 + r * r);
}

/// Normalized log density of p_r(x|y) over x in R^N.
///
/// The normalizer Γ((N+D)/2) / (π^{N/2} Γ(D/2)) does not depend on r, which
/// is what lets r-derivatives of the marginal be taken pointwise.
inline double kernel_log_density(const Vector& x, const Vector& y, double r, const SpaceConfig& space) {
  check_dim(x, space.n(), "kernel_log_density x");
  check_dim(y, space.n(), "kernel_log_density y");
  require(r > 0.0, "kernel_log_density: r must be > 0");
  const double n = space.n();
  const double d2 = (x - y).squaredNorm();
  if (space.is_gaussian()) {
    return -0.5 * n * std::log(2.0 * std::numbers::pi * r * r) - d2 / (2.0 * r * r);
  }
  const double d = space.d();
  const double log_c = std::lgamma(0.5 * (n + d)) - 0.5 * n * std::log(std::numbers::pi) - std::lgamma(0.5 * d);
  // r^D / (d2 + r^2)^{(N+D)/2} = r^{-N} (1 + d2/r^2)^{-(N+D)/2}
  return log_c - n * std::log(r) - space.half_total() * std::log1p(d2 / (r * r));
}

/// Law of the perturbation radius |x - y| at anchor r.
struct RadiusLaw {
  SpaceConfig space;
  double r;

  static RadiusLaw make(const SpaceConfig& space, double r) {
    require(r > 0.0, "RadiusLaw: r must be > 0");
    return RadiusLaw{space, r};
  }
};

/// Normalized radius density.
///
/// Finite D: 2 R^{N-1} r^D / (B(N/2, D/2) (R^2 + r^2)^{(N+D)/2}).
/// Gaussian mode: chi density with N degrees of freedom and scale sigma = r.
inline double radius_pdf(double big_r, const RadiusLaw& law) {
  require(big_r > 0.0, "radius_pdf: R must be > 0");
  const double n = law.space.n();
  const double r = law.r;
  if (law.space.is_gaussian()) {
    const double z = big_r / r;
    return std::exp(std::log(2.0) + (n - 1.0) * std::log(z) - 0.5 * z * z - 0.5 * n * std::log(2.0) -
                    std::lgamma(0.5 * n)) /
           r;
  }
  const double d = law.space.d();
  const double z = big_r / r;
  // R^{N-1} r^D (R^2+r^2)^{-(N+D)/2} = r^{-1} z^{N-1} (1+z^2)^{-(N+D)/2}
  const double log_pdf = std::log(2.0) - log_beta(0.5 * n, 0.5 * d) + (n - 1.0) * std::log(z) -
                         0.5 * (n + d) * std::log1p(z * z) - std::log(r);
  return std::exp(log_pdf);
}

namespace detail {
inline double gamma_draw(Engine& rng, double shape) { return std::gamma_distribution<double>(shape, 1.0)(rng); }

inline double positive_gamma_draw(Engine& rng, double shape) {
  for (;;) {
    const double g = gamma_draw(rng, shape);
    if (g > 0.0) return g;
  }
}
}  // namespace detail

/// Draws R with R1 ~ Beta(N/2, D/2) built from two Gamma variates, then
/// R = r sqrt(R1 / (1 - R1)). r = 0 returns 0 without consuming randomness.
inline double sample_radius(Engine& rng, const SpaceConfig& space, double r) {
  require(r >= 0.0, "sample_radius: r must be >= 0");
  if (r == 0.0) return 0.0;
  const double a = 0.5 * space.n();
  if (space.is_gaussian()) return r * std::sqrt(2.0 * detail::gamma_draw(rng, a));
  for (;;) {
    const double ga = detail::gamma_draw(rng, a);
    const double gb = detail::gamma_draw(rng, 0.5 * space.d());
    // R1 = ga / (ga + gb) == 1 exactly; resample.
    if (gb > 0.0 && ga + gb != ga) return r * std::sqrt(ga / gb);
  }
}

inline double sample_radius(Engine& rng, const RadiusLaw& law) { return sample_radius(rng, law.space, law.r); }

inline Vector sample_unit_direction(Engine& rng, int n) {
  require(n >= 1, "sample_unit_direction: N must be >= 1");
  Vector w(n);
  for (;;) {
    for (int i = 0; i < n; ++i) w[i] = standard_normal(rng);
    const double norm = w.norm();
    if (norm > 1e-150 && std::isfinite(norm)) return w / norm;
  }
}

/// Test hook: the perturbed point for an injected radius and direction.
inline AugmentedPoint perturb_with(const Vector& y, double big_r, const Vector& u, double r) {
  require(y.size() == u.size(), "perturb_with: dimension mismatch");
  return AugmentedPoint{y + big_r * u, r};
}

/// Draws x ~ p_r(.|y).
///
/// Uses the three-step construction with one shared Gaussian vector w:
/// direction u = w/|w|, and the Beta numerator Gamma(N/2) variate is
/// |w|^2/2 (independent of u), so R u = r w / sqrt(2 G_b) with
/// G_b ~ Gamma(D/2). Gaussian mode draws the same w first and returns y + sigma w,
/// so both modes see matched noise for a given engine state.
inline AugmentedPoint perturb(Engine& rng, const Vector& y, double r, const SpaceConfig& space) {
  check_dim(y, space.n(), "perturb");
  require(r >= 0.0, "perturb: r must be >= 0");
  if (r == 0.0) return AugmentedPoint{y, 0.0};
  const int n = space.n();
  Vector w(n);
  for (;;) {
    for (int i = 0; i < n; ++i) w[i] = standard_normal(rng);
    if (w.squaredNorm() > 0.0) break;
  }
  if (space.is_gaussian()) return AugmentedPoint{y + r * w, r};
  const double gb = detail::positive_gamma_draw(rng, 0.5 * space.d());
  return AugmentedPoint{y + (r / std::sqrt(2.0 * gb)) * w, r};
}

/// Prior at r_max: the kernel centred at the origin.
inline AugmentedPoint sample_prior(Engine& rng, double r_max, const SpaceConfig& space) {
  require(r_max > 0.0, "sample_prior: r_max must be > 0");
  return perturb(rng, Vector::Zero(space.n()), r_max, space);
}

}  // namespace pfgmpp
