#pragma once

// Anchored-ODE sampling: rho schedule, Heun integration with optional noise
// injection, and the DDIM-transferred sampler.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pfgmpp/csv.hpp"
#include "pfgmpp/field.hpp"
#include "pfgmpp/geometry.hpp"
#include "pfgmpp/rng.hpp"
#include "pfgmpp/types.hpp"

namespace pfgmpp {

/// Decreasing anchors r_0 = r_max, ..., r_{T-1} = r_min, r_T = 0.
struct SamplerSchedule {
  double r_max = 0.0;
  double r_min = 0.0;
  double rho = 7.0;
  int steps = 0;
  std::vector<double> nodes;
};

inline SamplerSchedule build_schedule(double r_max, double r_min, double rho, int steps) {
  require(std::isfinite(r_max) && r_min > 0.0 && r_max > r_min, "build_schedule: need r_max > r_min > 0");
  require(rho > 0.0, "build_schedule: rho must be > 0");
  require(steps >= 2, "build_schedule: steps must be >= 2");
  SamplerSchedule s{r_max, r_min, rho, steps, {}};
  const double a = std::pow(r_max, 1.0 / rho);
  const double b = std::pow(r_min, 1.0 / rho);
  s.nodes.resize(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i < steps; ++i) s.nodes[i] = std::pow(a + (static_cast<double>(i) / (steps - 1)) * (b - a), rho);
  s.nodes.front() = r_max;
  s.nodes[steps - 1] = r_min;
  s.nodes[steps] = 0.0;
  for (int i = 0; i < steps; ++i)
    require(s.nodes[i] > s.nodes[i + 1], "build_schedule: nodes are not strictly decreasing");
  return s;
}

/// Schedule in sigma units mapped through r = sigma sqrt(D).
inline SamplerSchedule schedule_for_space(const SpaceConfig& space, double sigma_max, double sigma_min, double rho,
                                          int steps) {
  return build_schedule(space.anchor_for_sigma(sigma_max), space.anchor_for_sigma(sigma_min), rho, steps);
}

/// How alpha-injection noise at anchor r is scaled: r/sqrt(D) as the
/// per-coordinate standard deviation (default) or as the variance.
enum class NoiseScale { StdDev, Variance };

struct HeunOptions {
  double alpha = 0.0;
  NoiseScale noise_scale = NoiseScale::StdDev;
  bool record_trajectory = false;
};

struct SampleResult {
  Matrix final;
  /// States before step 0 and after every step, when recorded.
  std::vector<Matrix> trajectory;
  long nfe = 0;
};

/// Heun's method on dx/dr over a batch of chains (one per column). Chain c
/// draws injection noise from rngs[c]. The last step to r_T = 0 is Euler only,
/// so NFE = 2T - 1.
template <DriftBackend Backend>
SampleResult heun_solve(const Backend& backend, const SamplerSchedule& schedule, const Matrix& x0,
                        std::span<Engine> rngs, const HeunOptions& opt = {}) {
  require(schedule.steps >= 2 && schedule.nodes.size() == static_cast<std::size_t>(schedule.steps) + 1,
          "heun_solve: invalid schedule (needs T >= 2)");
  require(opt.alpha >= 0.0, "heun_solve: alpha must be >= 0");
  require(x0.rows() == backend.space().n(), "heun_solve: dimension mismatch");
  require(opt.alpha == 0.0 || static_cast<Eigen::Index>(rngs.size()) == x0.cols(),
          "heun_solve: need one engine per chain when alpha > 0");
  const SpaceConfig& space = backend.space();
  SampleResult out;
  Matrix x = x0;
  if (opt.record_trajectory) out.trajectory.push_back(x);
  for (int i = 0; i < schedule.steps; ++i) {
    const double r_cur = schedule.nodes[i];
    const double r_next = schedule.nodes[i + 1];
    if (opt.alpha > 0.0) {
      const double s = space.sigma_for_anchor(r_cur);
      const double scale = opt.alpha * (opt.noise_scale == NoiseScale::StdDev ? s : std::sqrt(s));
      for (Eigen::Index c = 0; c < x.cols(); ++c)
        for (Eigen::Index k = 0; k < x.rows(); ++k) x(k, c) += scale * standard_normal(rngs[c]);
    }
    Matrix d;
    Matrix x_next;
    try {
      d = backend.drift_batch(x, r_cur);
      ++out.nfe;
      x_next = x + (r_next - r_cur) * d;
      if (r_next > 0.0) {
        const Matrix d2 = backend.drift_batch(x_next, r_next);
        ++out.nfe;
        x_next = x + (r_next - r_cur) * (0.5 * d + 0.5 * d2);
      }
    } catch (const ValidationError& e) {
      throw RuntimeError("heun_solve: drift failed at step " + std::to_string(i) + ": " + e.what());
    } catch (const RuntimeError& e) {
      throw RuntimeError("heun_solve: drift failed at step " + std::to_string(i) + ": " + e.what());
    }
    x = std::move(x_next);
    if (opt.record_trajectory) out.trajectory.push_back(x);
  }
  out.final = std::move(x);
  return out;
}

/// Single-chain form.
template <DriftBackend Backend>
SampleResult heun_solve(const Backend& backend, const SamplerSchedule& schedule, const Vector& x0, Engine& rng,
                        double alpha, NoiseScale noise_scale = NoiseScale::StdDev) {
  HeunOptions opt{alpha, noise_scale, true};
  return heun_solve(backend, schedule, Matrix(x0), std::span<Engine>(&rng, 1), opt);
}

/// Draws `count` prior points at r_max and integrates them. Chain c uses
/// substream(seed, {c}) for its prior draw and its injection noise.
template <DriftBackend Backend>
SampleResult generate(const Backend& backend, const SamplerSchedule& schedule, int count, std::uint64_t seed,
                      const HeunOptions& opt = {}) {
  require(count >= 1, "generate: count must be >= 1");
  const SpaceConfig& space = backend.space();
  std::vector<Engine> rngs;
  rngs.reserve(static_cast<std::size_t>(count));
  Matrix x0(space.n(), count);
  for (int c = 0; c < count; ++c) {
    rngs.push_back(substream(seed, {static_cast<std::uint64_t>(c)}));
    x0.col(c) = sample_prior(rngs.back(), schedule.r_max, space).x;
  }
  return heun_solve(backend, schedule, x0, std::span<Engine>(rngs), opt);
}

/// Rows (step, r, x0..x{N-1}, chain) for every recorded state.
inline csv::Writer trajectory_csv(const SampleResult& res, const SamplerSchedule& schedule) {
  require(!res.trajectory.empty(), "trajectory_csv: trajectory was not recorded");
  std::vector<std::string> header{"step", "r"};
  const Eigen::Index n = res.trajectory.front().rows();
  for (Eigen::Index k = 0; k < n; ++k) header.push_back("x" + std::to_string(k));
  header.push_back("chain");
  csv::Writer w(header);
  for (Eigen::Index c = 0; c < res.trajectory.front().cols(); ++c) {
    for (std::size_t s = 0; s < res.trajectory.size(); ++s) {
      std::vector<double> row{static_cast<double>(s), schedule.nodes[s]};
      for (Eigen::Index k = 0; k < n; ++k) row.push_back(res.trajectory[s](k, c));
      row.push_back(static_cast<double>(c));
      w.row(row);
    }
  }
  return w;
}

/// Raw DDPM-mode network f(x, t), batched over columns.
using NoisePredictor = std::function<Matrix(const Matrix&, double)>;

struct DdimConfig {
  double beta_bar_min = 0.1;
  double beta_bar_max = 20.0;
};

namespace detail {
inline double ddim_alpha(double t, const DdimConfig& cfg) {
  return std::exp(-0.5 * t * t * (cfg.beta_bar_max - cfg.beta_bar_min) - t * cfg.beta_bar_min);
}
}  // namespace detail

/// DDIM-transferred sampler with t_i = i / T for i = T..0. Starts from
/// sqrt(alpha_1) R v with R v ~ p_{r_max}, r_max = sigma_max sqrt(D).
inline Matrix ddim_transfer_solve(const NoisePredictor& f, const DdimConfig& cfg, const SpaceConfig& space,
                                  const Matrix& prior_draws, int steps) {
  require(steps >= 1, "ddim_transfer_solve: T must be >= 1");
  require(prior_draws.rows() == space.n(), "ddim_transfer_solve: dimension mismatch");
  const double alpha1 = detail::ddim_alpha(1.0, cfg);
  Matrix x = std::sqrt(alpha1) * prior_draws;
  for (int i = steps; i >= 1; --i) {
    const double t_i = static_cast<double>(i) / steps;
    const double t_prev = static_cast<double>(i - 1) / steps;
    const double a_i = detail::ddim_alpha(t_i, cfg);
    const double a_prev = detail::ddim_alpha(t_prev, cfg);
    const double ratio = std::sqrt(a_prev / a_i);
    const Matrix eps = f(x, t_i);
    x = ratio * x + (std::sqrt(1.0 - a_prev) - ratio * std::sqrt(1.0 - a_i)) * eps;
  }
  return x;
}

/// r_max for the DDIM prior: sigma_max = sqrt((1 - alpha_1) / alpha_1).
inline double ddim_r_max(const DdimConfig& cfg, const SpaceConfig& space) {
  const double a1 = detail::ddim_alpha(1.0, cfg);
  return space.anchor_for_sigma(std::sqrt((1.0 - a1) / a1));
}

inline Matrix ddim_transfer_solve(const NoisePredictor& f, const DdimConfig& cfg, const SpaceConfig& space,
                                  Engine& rng, int steps, int count = 1) {
  Matrix prior(space.n(), count);
  const double r_max = ddim_r_max(cfg, space);
  for (int c = 0; c < count; ++c) prior.col(c) = sample_prior(rng, r_max, space).x;
  return ddim_transfer_solve(f, cfg, space, prior, steps);
}

}  // namespace pfgmpp
