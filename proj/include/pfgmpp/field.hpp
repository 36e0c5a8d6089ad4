#pragma once

// Brute-force electric field of a finite point cloud in the augmented
// space, its posterior weights, drift backends, the Gaussian score, and the
// numerical certificates built on them.

#include <algorithm>
#include <concepts>
#include <cmath>
#include <limits>
#include <vector>

#include "pfgmpp/geometry.hpp"
#include "pfgmpp/rng.hpp"
#include "pfgmpp/types.hpp"

namespace pfgmpp {

/// Finite set of clean points with uniform weights. Stored one point per column.
class DataCloud {
 public:
  DataCloud() = default;
  explicit DataCloud(Matrix points) : points_(std::move(points)) {
    require(points_.cols() >= 1, "DataCloud must be nonempty");
    require(points_.rows() >= 1, "DataCloud points must have dimension >= 1");
    require(points_.allFinite(), "DataCloud points must be finite");
  }
  static DataCloud from_points(const std::vector<Vector>& pts) {
    require(!pts.empty(), "DataCloud must be nonempty");
    Matrix m(pts.front().size(), static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      require(pts[i].size() == m.rows(), "DataCloud points must share one dimension");
      m.col(static_cast<Eigen::Index>(i)) = pts[i];
    }
    return DataCloud(std::move(m));
  }

  int dim() const { return static_cast<int>(points_.rows()); }
  int size() const { return static_cast<int>(points_.cols()); }
  Vector point(int i) const { return points_.col(i); }
  const Matrix& points() const { return points_; }

  /// Largest pairwise distance.
  double diameter() const {
    double best = 0.0;
    for (int i = 0; i < size(); ++i)
      for (int j = i + 1; j < size(); ++j) best = std::max(best, (points_.col(i) - points_.col(j)).norm());
    return best;
  }

 private:
  Matrix points_;
};

namespace detail {

inline void check_cloud(const DataCloud& cloud, const SpaceConfig& space) {
  require(cloud.dim() == space.n(), "cloud dimension does not match SpaceConfig.n_data");
}

/// Unnormalized log posterior weights relative to the r-only constant.
inline Vector log_weights(const Vector& x, double r, const DataCloud& cloud, const SpaceConfig& space) {
  check_dim(x, space.n(), "posterior x");
  check_cloud(cloud, space);
  const Eigen::ArrayXd d2 = (cloud.points().colwise() - x).colwise().squaredNorm().transpose().array();
  if (r > 0.0) {
    if (space.is_gaussian()) return (-d2 / (2.0 * r * r)).matrix();
    return (-space.half_total() * (d2 / (r * r)).log1p()).matrix();
  }
  // r = 0: the posterior is a point mass on a coincident cloud point, or
  // (finite D) proportional to |x - y|^{-(N+D)} otherwise.
  const int hits = static_cast<int>((d2 == 0.0).count());
  if (hits > 1) throw ValidationError("posterior undefined: r = 0 at a point shared by several cloud points");
  Vector out(cloud.size());
  if (hits == 1) {
    for (int i = 0; i < cloud.size(); ++i)
      out[i] = d2[i] == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return out;
  }
  if (space.is_gaussian()) {
    Eigen::Index best;
    const double m = d2.minCoeff(&best);
    if ((d2 == m).count() > 1) throw ValidationError("posterior undefined: r = 0 with tied nearest points");
    out.setConstant(-std::numeric_limits<double>::infinity());
    out[best] = 0.0;
    return out;
  }
  return (-space.half_total() * d2.log()).matrix();
}

/// exp(l - max l); returns the shift.
inline double shifted_exp(const Vector& logw, Vector& w) {
  const double m = logw.maxCoeff();
  w = (logw.array() - m).exp().matrix();
  return m;
}

}  // namespace detail

/// Posterior over cloud points given x at anchor r; sums to one.
inline Vector posterior_weights(const AugmentedPoint& p, const DataCloud& cloud, const SpaceConfig& space) {
  require(p.r >= 0.0, "posterior_weights: r must be >= 0");
  Vector w;
  detail::shifted_exp(detail::log_weights(p.x, p.r, cloud, space), w);
  return w / w.sum();
}

/// Field components sharing one positive normalizer exp(log_scale).
struct FieldValue {
  Vector e_x;
  double e_r = 0.0;
  double log_scale = 0.0;
};

/// E_x = sum_i w_i (x - y_i), E_r = sum_i w_i r with w_i = (|x-y_i|^2 + r^2)^{-(N+D)/2},
/// reported up to a shared positive constant.
inline FieldValue empirical_field(const AugmentedPoint& p, const DataCloud& cloud, const SpaceConfig& space) {
  require(p.r > 0.0, "empirical_field: r must be > 0");
  Vector w;
  const double shift = detail::shifted_exp(detail::log_weights(p.x, p.r, cloud, space), w);
  const double total = w.sum();
  FieldValue f;
  f.e_x = total * p.x - cloud.points() * w;
  f.e_r = total * p.r;
  f.log_scale = shift;
  if (!space.is_gaussian()) f.log_scale -= space.half_total() * 2.0 * std::log(p.r);
  return f;
}

/// Posterior mean sum_i w_i y_i.
inline Vector posterior_mean(const AugmentedPoint& p, const DataCloud& cloud, const SpaceConfig& space) {
  return cloud.points() * posterior_weights(p, cloud, space);
}

/// dx/dr = E_x / E_r from the exact field of a cloud.
class OracleBackend {
 public:
  OracleBackend(const DataCloud& cloud, SpaceConfig space) : cloud_(&cloud), space_(space) {
    detail::check_cloud(cloud, space);
  }
  const SpaceConfig& space() const { return space_; }
  Vector drift(const Vector& x, double r) const {
    require(r > 0.0, "drift: r must be > 0");
    const FieldValue f = empirical_field(AugmentedPoint{x, r}, *cloud_, space_);
    return f.e_x / f.e_r;
  }
  /// Batched drift. Squared distances come from |x|^2 + |y|^2 - 2 y.x, clamped
  /// at zero; agrees with drift() to rounding of that expansion.
  Matrix drift_batch(const Matrix& xs, double r) const {
    require(r > 0.0, "drift: r must be > 0");
    require(xs.rows() == space_.n(), "drift: dimension mismatch");
    const Matrix& ys = cloud_->points();
    const Eigen::ArrayXd ysq = ys.colwise().squaredNorm().transpose().array();
    Matrix out(xs.rows(), xs.cols());
    constexpr Eigen::Index kBlock = 256;
    for (Eigen::Index c0 = 0; c0 < xs.cols(); c0 += kBlock) {
      const Eigen::Index nb = std::min(kBlock, xs.cols() - c0);
      const auto xb = xs.middleCols(c0, nb);
      Eigen::ArrayXXd l = (-2.0 * (ys.transpose() * xb)).array();
      l.colwise() += ysq;
      l.rowwise() += xb.colwise().squaredNorm().array();
      l = l.max(0.0);
      if (space_.is_gaussian()) {
        l *= -1.0 / (2.0 * r * r);
      } else {
        l = -space_.half_total() * (1.0 + l / (r * r)).log();
      }
      l.rowwise() -= l.colwise().maxCoeff();
      l = l.exp();
      const Eigen::RowVectorXd total = l.colwise().sum().matrix();
      const Matrix mean = (ys * l.matrix()).array().rowwise() / total.array();
      out.middleCols(c0, nb) = (xb - mean) / r;
    }
    return out;
  }

 private:
  const DataCloud* cloud_;
  SpaceConfig space_;
};

/// dx/dr = (x - D(x, r)) / r for a batched denoiser D (one point per column).
template <class DenoiseBatch>
class DenoiserBackend {
 public:
  DenoiserBackend(DenoiseBatch denoise, SpaceConfig space) : denoise_(std::move(denoise)), space_(space) {}
  const SpaceConfig& space() const { return space_; }
  Matrix drift_batch(const Matrix& xs, double r) const {
    require(r > 0.0, "drift: r must be > 0");
    return (xs - denoise_(xs, r)) / r;
  }
  Vector drift(const Vector& x, double r) const { return drift_batch(Matrix(x), r).col(0); }

 private:
  DenoiseBatch denoise_;
  SpaceConfig space_;
};

template <class Backend>
concept DriftBackend = requires(const Backend& b, const Vector& x, const Matrix& xs, double r) {
  { b.drift(x, r) } -> std::convertible_to<Vector>;
  { b.drift_batch(xs, r) } -> std::convertible_to<Matrix>;
  { b.space() } -> std::convertible_to<SpaceConfig>;
};

template <DriftBackend Backend>
Vector drift(const AugmentedPoint& p, const Backend& backend) {
  return backend.drift(p.x, p.r);
}

/// Score of the empirical Gaussian mixture at noise level sigma.
inline Vector gaussian_score(const Vector& x, double sigma, const DataCloud& cloud) {
  require(sigma > 0.0, "gaussian_score: sigma must be > 0");
  const SpaceConfig g = SpaceConfig::gaussian(cloud.dim());
  const Vector w = posterior_weights(AugmentedPoint{x, sigma}, cloud, g);
  return (cloud.points() * w - x) / (sigma * sigma);
}

/// Log density of the empirical Gaussian mixture (closed form).
inline double gaussian_mixture_log_density(const Vector& x, double sigma, const DataCloud& cloud) {
  require(sigma > 0.0, "gaussian_mixture_log_density: sigma must be > 0");
  const SpaceConfig g = SpaceConfig::gaussian(cloud.dim());
  const Vector l = detail::log_weights(x, sigma, cloud, g);
  const double m = l.maxCoeff();
  const double lse = m + std::log((l.array() - m).exp().sum());
  return lse - std::log(static_cast<double>(cloud.size())) -
         0.5 * cloud.dim() * std::log(2.0 * std::numbers::pi * sigma * sigma);
}

/// Probes x ~ p_sigma: Gaussian perturbations of uniformly chosen cloud points.
inline std::vector<Vector> gaussian_probes(Engine& rng, const DataCloud& cloud, double sigma, int count) {
  const SpaceConfig g = SpaceConfig::gaussian(cloud.dim());
  std::uniform_int_distribution<int> pick(0, cloud.size() - 1);
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(perturb(rng, cloud.point(pick(rng)), sigma, g).x);
  return out;
}

/// Mean over probes of |sqrt(D) E_x/E_r + sigma * score| at r = sigma sqrt(D).
///
/// The field points away from the data and the score towards it, so the sum
/// (not the difference) is the quantity that vanishes as D grows.
inline double field_score_divergence(double sigma, double d_aug, const DataCloud& cloud,
                                     const std::vector<Vector>& probes) {
  require(sigma > 0.0, "field_score_divergence: sigma must be > 0");
  require(!probes.empty(), "field_score_divergence: no probes");
  const SpaceConfig space = SpaceConfig::finite(cloud.dim(), d_aug);
  const double r = space.anchor_for_sigma(sigma);
  double acc = 0.0;
  for (const Vector& x : probes) {
    const FieldValue f = empirical_field(AugmentedPoint{x, r}, cloud, space);
    acc += (std::sqrt(d_aug) * f.e_x / f.e_r + sigma * gaussian_score(x, sigma, cloud)).norm();
  }
  return acc / static_cast<double>(probes.size());
}

/// Axis-aligned lattice with spacing h over [lo, hi] per coordinate (N = 1 or 2).
struct Lattice {
  std::vector<double> lo;
  std::vector<double> hi;
};

struct ContinuityResult {
  /// Interior node coordinates and residuals, row-major over the lattice.
  std::vector<Vector> nodes;
  std::vector<double> residual;
  double max_abs = 0.0;
};

/// Marginal density q_r(x) = (1/n) sum_i p_r(x | y_i) with the normalized kernel.
inline double marginal_density(const Vector& x, double r, const DataCloud& cloud, const SpaceConfig& space) {
  double acc = 0.0;
  for (int i = 0; i < cloud.size(); ++i) acc += std::exp(kernel_log_density(x, cloud.point(i), r, space));
  return acc / cloud.size();
}

/// Central-difference residual of d_r q_r + div_x(q_r * dx/dr) on the interior
/// of a lattice, with one step h for both r and x.
inline ContinuityResult continuity_residual(const Lattice& grid, const DataCloud& cloud, double r, double h,
                                            const SpaceConfig& space) {
  const int n = space.n();
  require(n == 1 || n == 2, "continuity_residual: only N = 1 or N = 2 supported");
  require(static_cast<int>(grid.lo.size()) == n && static_cast<int>(grid.hi.size()) == n,
          "continuity_residual: lattice dimension mismatch");
  require(h > 0.0, "continuity_residual: h must be > 0");
  require(h < r, "continuity_residual: grid too coarse (h >= r)");
  detail::check_cloud(cloud, space);
  const OracleBackend oracle(cloud, space);

  std::vector<int> counts(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    require(grid.hi[k] > grid.lo[k], "continuity_residual: empty lattice");
    counts[k] = static_cast<int>(std::floor((grid.hi[k] - grid.lo[k]) / h + 1e-9)) + 1;
    require(counts[k] >= 3, "continuity_residual: lattice needs at least 3 nodes per axis");
  }
  auto flux = [&](const Vector& x, int axis) {
    return marginal_density(x, r, cloud, space) * oracle.drift(x, r)[axis];
  };

  ContinuityResult out;
  const int ny = n == 2 ? counts[1] : 3;
  for (int i = 1; i + 1 < counts[0]; ++i) {
    for (int j = 1; j + 1 < ny; ++j) {
      Vector x(n);
      x[0] = grid.lo[0] + i * h;
      if (n == 2) x[1] = grid.lo[1] + j * h;
      double res = (marginal_density(x, r + h, cloud, space) - marginal_density(x, r - h, cloud, space)) / (2.0 * h);
      for (int k = 0; k < n; ++k) {
        Vector xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        res += (flux(xp, k) - flux(xm, k)) / (2.0 * h);
      }
      out.nodes.push_back(x);
      out.residual.push_back(res);
      out.max_abs = std::max(out.max_abs, std::abs(res));
    }
  }
  return out;
}

}  // namespace pfgmpp
