#pragma once

// Diagnostics: phase (TVD) indicator, radius-variance and field/score
// convergence curves, the two-point posterior ratio, sliced Wasserstein,
// and the robustness / NFE sweeps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "pfgmpp/csv.hpp"
#include "pfgmpp/field.hpp"
#include "pfgmpp/geometry.hpp"
#include "pfgmpp/rng.hpp"
#include "pfgmpp/sampler.hpp"

namespace pfgmpp {

/// Mean over probes x ~ p_r of 1/2 sum_i |w_i(x) - 1/n|.
inline double tvd_phase(const DataCloud& cloud, double r, int n_probes, Engine& rng, const SpaceConfig& space) {
  require(r > 0.0, "tvd_phase: r must be > 0");
  require(n_probes >= 1, "tvd_phase: n_probes must be >= 1");
  const int n = cloud.size();
  if (n == 1) return 0.0;
  std::uniform_int_distribution<int> pick(0, n - 1);
  double acc = 0.0;
  for (int p = 0; p < n_probes; ++p) {
    const AugmentedPoint x = perturb(rng, cloud.point(pick(rng)), r, space);
    const Vector w = posterior_weights(x, cloud, space);
    acc += 0.5 * (w.array() - 1.0 / n).abs().sum();
  }
  return acc / n_probes;
}

struct RadiusVariancePoint {
  std::string d_label;
  double d_aug = 0.0;  // +inf for the Gaussian asymptote
  double variance = std::numeric_limits<double>::quiet_NaN();
  bool computed = false;  // false for D <= 2 (infinite variance)
};

/// Monte Carlo Var[R] at r = sigma sqrt(D) for each D, plus the Gaussian
/// (chi) asymptote. Every entry reuses the same seed.
inline std::vector<RadiusVariancePoint> radius_variance_curve(int n_data, double sigma,
                                                              const std::vector<double>& d_list, int n_samples,
                                                              std::uint64_t seed) {
  require(n_samples >= 2, "radius_variance_curve: n_samples must be >= 2");
  require(std::is_sorted(d_list.begin(), d_list.end()), "radius_variance_curve: D list must be ascending");
  auto variance = [&](const SpaceConfig& space) {
    Engine rng(seed);
    const double r = space.anchor_for_sigma(sigma);
    double mean = 0.0;
    double m2 = 0.0;
    for (int i = 0; i < n_samples; ++i) {
      const double x = sample_radius(rng, space, r);
      const double delta = x - mean;
      mean += delta / (i + 1);
      m2 += delta * (x - mean);
    }
    return m2 / (n_samples - 1);
  };
  std::vector<RadiusVariancePoint> out;
  for (double d : d_list) {
    RadiusVariancePoint p{SpaceConfig::finite(n_data, d).label(), d};
    if (d > 2.0) {
      p.variance = variance(SpaceConfig::finite(n_data, d));
      p.computed = true;
    }
    out.push_back(p);
  }
  out.push_back({"gaussian", std::numeric_limits<double>::infinity(), variance(SpaceConfig::gaussian(n_data)), true});
  return out;
}

struct CurvePoint {
  double d_aug = 0.0;
  double value = 0.0;
};

/// field_score_divergence over D_list with one shared probe set x ~ p_sigma.
inline std::vector<CurvePoint> convergence_curve(const DataCloud& cloud, double sigma, const std::vector<double>& d_list,
                                                 int n_probes, Engine& rng) {
  const std::vector<Vector> probes = gaussian_probes(rng, cloud, sigma, n_probes);
  std::vector<CurvePoint> out;
  for (double d : d_list) out.push_back({d, field_score_divergence(sigma, d, cloud, probes)});
  return out;
}

struct PosteriorRatio {
  double empirical = 0.0;
  double predicted = 0.0;
};

/// Two points x1 = 0, x2 = l e_1 in N dimensions; probes y ~ p_r(.|x1).
///
/// Reports p_r(y|x1) / p_r(y|x2) (> 1, the orientation of the closed form),
/// aggregated as the geometric mean over probes, against
/// ((l^2 + r^2 N/(D-1) + r^2) / (r^2 N/(D-1) + r^2))^{(N+D)/2}.
inline PosteriorRatio posterior_ratio_check(double l, double r, int n_data, double d_aug, Engine& rng, int n_trials) {
  require(l >= 0.0, "posterior_ratio_check: l must be >= 0");
  require(r > 0.0, "posterior_ratio_check: r must be > 0");
  require(d_aug > 1.0, "posterior_ratio_check: D must be > 1");
  require(n_trials >= 1, "posterior_ratio_check: n_trials must be >= 1");
  const SpaceConfig space = SpaceConfig::finite(n_data, d_aug);
  const Vector x1 = Vector::Zero(n_data);
  Vector x2 = Vector::Zero(n_data);
  x2[0] = l;
  const double spread = r * r * n_data / (d_aug - 1.0);
  PosteriorRatio out;
  out.predicted = std::pow((l * l + spread + r * r) / (spread + r * r), 0.5 * (n_data + d_aug));
  if (l == 0.0) {
    out.empirical = 1.0;
    return out;
  }
  double log_acc = 0.0;
  for (int t = 0; t < n_trials; ++t) {
    const Vector y = perturb(rng, x1, r, space).x;
    log_acc += kernel_log_unnorm(y, x1, r, space) - kernel_log_unnorm(y, x2, r, space);
  }
  out.empirical = std::exp(log_acc / n_trials);
  return out;
}

/// Closed-form log of the predicted ratio (stable for large exponents).
inline double posterior_ratio_log_predicted(double l, double r, int n_data, double d_aug) {
  const double spread = r * r * n_data / (d_aug - 1.0);
  return 0.5 * (n_data + d_aug) * std::log1p(l * l / (spread + r * r));
}

namespace detail {
/// W1 between two 1-D empirical distributions: integral of |F_a - F_b|.
inline double wasserstein1_sorted(const std::vector<double>& a, const std::vector<double>& b) {
  const double wa = 1.0 / static_cast<double>(a.size());
  const double wb = 1.0 / static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double fa = 0.0;
  double fb = 0.0;
  double prev = std::min(a.front(), b.front());
  double acc = 0.0;
  while (i < a.size() || j < b.size()) {
    const double next = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
    acc += std::abs(fa - fb) * (next - prev);
    prev = next;
    while (i < a.size() && a[i] == next) {
      fa += wa;
      ++i;
    }
    while (j < b.size() && b[j] == next) {
      fb += wb;
      ++j;
    }
  }
  return acc;
}
}  // namespace detail

/// Mean over n_proj random unit directions of the 1-D Wasserstein-1 distance
/// between projected samples (one sample per column).
inline double sliced_wasserstein(const Matrix& a, const Matrix& b, int n_proj, Engine& rng) {
  require(a.cols() >= 1 && b.cols() >= 1, "sliced_wasserstein: empty sample set");
  require(a.rows() == b.rows(), "sliced_wasserstein: dimension mismatch");
  require(n_proj >= 1, "sliced_wasserstein: n_proj must be >= 1");
  double acc = 0.0;
  std::vector<double> pa(static_cast<std::size_t>(a.cols()));
  std::vector<double> pb(static_cast<std::size_t>(b.cols()));
  for (int p = 0; p < n_proj; ++p) {
    const Vector theta = sample_unit_direction(rng, static_cast<int>(a.rows()));
    Eigen::Map<Vector>(pa.data(), a.cols()) = a.transpose() * theta;
    Eigen::Map<Vector>(pb.data(), b.cols()) = b.transpose() * theta;
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    acc += detail::wasserstein1_sorted(pa, pb);
  }
  return acc / n_proj;
}

/// Type-erased drift backend for sweeps.
class AnyBackend {
 public:
  using BatchFn = std::function<Matrix(const Matrix&, double)>;
  AnyBackend(BatchFn fn, SpaceConfig space) : fn_(std::move(fn)), space_(space) {}
  template <DriftBackend B>
  static AnyBackend wrap(B backend) {
    const SpaceConfig s = backend.space();
    return AnyBackend([b = std::move(backend)](const Matrix& xs, double r) { return b.drift_batch(xs, r); }, s);
  }
  const SpaceConfig& space() const { return space_; }
  Matrix drift_batch(const Matrix& xs, double r) const { return fn_(xs, r); }
  Vector drift(const Vector& x, double r) const { return fn_(Matrix(x), r).col(0); }

 private:
  BatchFn fn_;
  SpaceConfig space_;
};

struct SweepModel {
  std::string label;
  AnyBackend backend;
};

/// Sigma-unit schedule shared by every model of a sweep.
struct SweepSchedule {
  double sigma_max = 80.0;
  double sigma_min = 0.002;
  double rho = 7.0;
  int steps = 18;
};

struct SweepSettings {
  int count = 4096;
  int n_proj = 64;
  std::uint64_t seed = 0;
  /// Projections are drawn from this seed so every cell uses the same directions.
  std::uint64_t sw_seed = 1;
  NoiseScale noise_scale = NoiseScale::StdDev;
};

struct SweepRow {
  std::string model;
  std::string d_label;
  double alpha = 0.0;
  int steps = 0;
  long nfe = 0;
  double sw = 0.0;
  double degradation = 0.0;  // sw - sw(alpha = 0) for the same model
};

inline csv::Writer sweep_csv(const std::vector<SweepRow>& rows) {
  csv::Writer w({"model", "D", "alpha", "T", "nfe", "sw", "degradation"});
  for (const auto& r : rows)
    w.row_strings({r.model, r.d_label, csv::format_double(r.alpha), std::to_string(r.steps), std::to_string(r.nfe),
                   csv::format_double(r.sw), csv::format_double(r.degradation)});
  return w;
}

/// One sweep cell: generate settings.count samples and score them.
inline SweepRow sweep_cell(const SweepModel& m, const SweepSchedule& sched, double alpha, const Matrix& reference,
                           const SweepSettings& set) {
  const SamplerSchedule s =
      schedule_for_space(m.backend.space(), sched.sigma_max, sched.sigma_min, sched.rho, sched.steps);
  HeunOptions opt;
  opt.alpha = alpha;
  opt.noise_scale = set.noise_scale;
  const SampleResult res = generate(m.backend, s, set.count, set.seed, opt);
  Engine sw_rng(set.sw_seed);
  SweepRow row{m.label, m.backend.space().label(), alpha, sched.steps, res.nfe, 0.0, 0.0};
  row.sw = sliced_wasserstein(res.final, reference, set.n_proj, sw_rng);
  return row;
}

/// Every model x alpha. Degradation is relative to the model's alpha = 0 cell
/// (computed even if 0 is not in alpha_list).
inline std::vector<SweepRow> robustness_sweep(const std::vector<SweepModel>& models, const std::vector<double>& alphas,
                                              const SweepSchedule& sched, const Matrix& reference,
                                              const SweepSettings& set) {
  require(!models.empty(), "robustness_sweep: no models");
  for (const auto& m : models)
    require(m.backend.space().n() == models.front().backend.space().n(), "robustness_sweep: models disagree on N");
  std::vector<SweepRow> rows;
  for (const auto& m : models) {
    const double base = sweep_cell(m, sched, 0.0, reference, set).sw;
    for (double a : alphas) {
      SweepRow row = a == 0.0 ? SweepRow{m.label, m.backend.space().label(), 0.0, sched.steps, 2L * sched.steps - 1, base, 0.0}
                              : sweep_cell(m, sched, a, reference, set);
      row.degradation = row.sw - base;
      rows.push_back(row);
    }
  }
  return rows;
}

/// Every model x T at alpha = 0. Degradation is relative to the largest T.
inline std::vector<SweepRow> nfe_sweep(const std::vector<SweepModel>& models, const std::vector<int>& steps_list,
                                       const SweepSchedule& sched, const Matrix& reference, const SweepSettings& set) {
  require(!models.empty() && !steps_list.empty(), "nfe_sweep: empty models or T list");
  const int t_ref = *std::max_element(steps_list.begin(), steps_list.end());
  std::vector<SweepRow> rows;
  for (const auto& m : models) {
    std::vector<SweepRow> mine;
    double ref_sw = 0.0;
    for (int t : steps_list) {
      SweepSchedule s = sched;
      s.steps = t;
      mine.push_back(sweep_cell(m, s, 0.0, reference, set));
      if (t == t_ref) ref_sw = mine.back().sw;
    }
    for (auto& row : mine) {
      row.degradation = row.sw - ref_sw;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace pfgmpp
