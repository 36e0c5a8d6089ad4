#pragma once

// Training loops: EDM-transferred (log-normal sigma, r = sigma sqrt(D),
// preconditioned loss) and DDPM-transferred (uniform t, raw objective).

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "pfgmpp/csv.hpp"
#include "pfgmpp/denoiser.hpp"
#include "pfgmpp/field.hpp"
#include "pfgmpp/geometry.hpp"
#include "pfgmpp/network.hpp"
#include "pfgmpp/objective.hpp"
#include "pfgmpp/rng.hpp"

namespace pfgmpp {

enum class Objective { Edm, Ddpm };

inline std::string to_string(Objective o) { return o == Objective::Edm ? "edm" : "ddpm"; }

struct TrainConfig {
  SpaceConfig space = SpaceConfig::finite(2, 128.0);
  Objective objective = Objective::Edm;
  double p_mean = -1.2;
  double p_std = 1.2;
  int batch = 256;
  long iterations = 20000;
  std::uint64_t seed = 0;
  double lr = 1e-4;
  double ema_decay = 0.999;
  double sigma_data = 0.5;
  std::vector<int> hidden = default_hidden();
  double beta_bar_min = 0.1;
  double beta_bar_max = 20.0;
  /// Smallest t drawn in DDPM mode; t = 0 gives r = 0 and an undefined target.
  double ddpm_t_min = 1e-5;

  void validate() const {
    require(p_std >= 0.0, "train.p_std must be >= 0");
    require(batch >= 1, "train.batch must be >= 1");
    require(iterations >= 0, "train.iterations must be >= 0");
    require(lr > 0.0, "train.lr must be > 0");
    require(ema_decay >= 0.0 && ema_decay < 1.0, "train.ema_decay must be in [0, 1)");
    require(sigma_data > 0.0, "train.sigma_data must be > 0");
    require(beta_bar_max >= beta_bar_min && beta_bar_min >= 0.0, "train: need 0 <= beta_bar_min <= beta_bar_max");
    require(ddpm_t_min > 0.0 && ddpm_t_min < 1.0, "train.ddpm_t_min must be in (0, 1)");
  }
};

/// ln sigma ~ Normal(p_mean, p_std^2).
inline double sample_sigma(Engine& rng, const TrainConfig& cfg) {
  if (cfg.p_std == 0.0) return std::exp(cfg.p_mean);
  return std::exp(std::normal_distribution<double>(cfg.p_mean, cfg.p_std)(rng));
}

/// alpha_t = exp(-t^2 (b_max - b_min) / 2 - t b_min).
inline double ddpm_alpha(double t, double beta_bar_min, double beta_bar_max) {
  require(t >= 0.0 && t <= 1.0, "ddpm_alpha: t must be in [0, 1]");
  return std::exp(-0.5 * t * t * (beta_bar_max - beta_bar_min) - t * beta_bar_min);
}

inline double ddpm_alpha(double t, const TrainConfig& cfg) { return ddpm_alpha(t, cfg.beta_bar_min, cfg.beta_bar_max); }

/// sigma(t) = sqrt((1 - alpha_t) / alpha_t).
inline double ddpm_sigma(double t, double beta_bar_min, double beta_bar_max) {
  const double a = ddpm_alpha(t, beta_bar_min, beta_bar_max);
  return std::sqrt((1.0 - a) / a);
}

/// Uniform cloud point, log-normal sigma, r = sigma sqrt(D), kernel perturbation.
inline TrainingPair make_training_pair(Engine& rng, const DataCloud& cloud, const TrainConfig& cfg) {
  std::uniform_int_distribution<int> pick(0, cloud.size() - 1);
  const Vector y = cloud.point(pick(rng));
  const double sigma = sample_sigma(rng, cfg);
  const double r = cfg.space.anchor_for_sigma(sigma);
  return make_pair_from(y, perturb(rng, y, r, cfg.space), cfg.space);
}

inline DdpmPair make_ddpm_pair(Engine& rng, const DataCloud& cloud, const TrainConfig& cfg) {
  std::uniform_int_distribution<int> pick(0, cloud.size() - 1);
  const Vector y = cloud.point(pick(rng));
  const double t = std::uniform_real_distribution<double>(cfg.ddpm_t_min, 1.0)(rng);
  const double alpha = ddpm_alpha(t, cfg);
  const double r = cfg.space.anchor_for_sigma(std::sqrt((1.0 - alpha) / alpha));
  const AugmentedPoint p = perturb(rng, y, r, cfg.space);
  return DdpmPair{std::sqrt(alpha) * p.x, t, pfgmpp_target(p.x, y, r, cfg.space)};
}

struct LossRecord {
  long iter = 0;
  double loss = 0.0;  // mean per example
  double sigma_mean = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossRecord> trace;
};

inline csv::Writer loss_trace_csv(const std::vector<LossRecord>& trace) {
  csv::Writer w({"iter", "loss", "sigma_mean"});
  for (const auto& rec : trace) w.row({static_cast<double>(rec.iter), rec.loss, rec.sigma_mean});
  return w;
}

/// Moving average with the given window (shorter at the start).
inline std::vector<double> smooth(const std::vector<LossRecord>& trace, std::size_t window) {
  std::vector<double> out;
  double acc = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    acc += trace[i].loss;
    if (i >= window) acc -= trace[i - window].loss;
    out.push_back(acc / static_cast<double>(std::min(i + 1, window)));
  }
  return out;
}

using ProgressFn = std::function<void(const LossRecord&)>;

/// Runs cfg.iterations of pair generation -> loss -> Adam -> EMA.
///
/// Every batch element draws from its own engine substream(seed, {iter, k}),
/// so runs are reproducible and finite-D / Gaussian runs see matched noise.
inline TrainResult train(const DataCloud& cloud, const TrainConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  require(cloud.dim() == cfg.space.n(), "train: cloud dimension does not match space");
  TrainResult out;
  Checkpoint& ck = out.checkpoint;
  ck.space = cfg.space;
  ck.objective = to_string(cfg.objective);
  ck.pre.sigma_data = cfg.sigma_data;
  ck.beta_bar_min = cfg.beta_bar_min;
  ck.beta_bar_max = cfg.beta_bar_max;
  ck.hidden = cfg.hidden;
  ck.params = init_network(cfg.space.n() + 1, cfg.hidden, cfg.space.n(), detail::splitmix64(cfg.seed ^ 0x5eedULL));
  ck.ema = ck.params;
  AdamState adam = AdamState::for_params(ck.params, cfg.lr);

  std::vector<TrainingPair> batch(static_cast<std::size_t>(cfg.batch));
  std::vector<DdpmPair> ddpm_batch(static_cast<std::size_t>(cfg.batch));
  for (long it = 0; it < cfg.iterations; ++it) {
    double sigma_sum = 0.0;
    LossGrad lg;
    if (cfg.objective == Objective::Edm) {
      for (int k = 0; k < cfg.batch; ++k) {
        Engine rng = substream(cfg.seed, {static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(k)});
        batch[static_cast<std::size_t>(k)] = make_training_pair(rng, cloud, cfg);
        sigma_sum += cfg.space.sigma_for_anchor(batch[static_cast<std::size_t>(k)].perturbed.r);
      }
      lg = preconditioned_loss(ck.params, ck.pre, batch, cfg.space);
    } else {
      for (int k = 0; k < cfg.batch; ++k) {
        Engine rng = substream(cfg.seed, {static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(k)});
        ddpm_batch[static_cast<std::size_t>(k)] = make_ddpm_pair(rng, cloud, cfg);
        sigma_sum += ddpm_sigma(ddpm_batch[static_cast<std::size_t>(k)].t, cfg.beta_bar_min, cfg.beta_bar_max);
      }
      lg = ddpm_loss(ck.params, ddpm_batch);
    }
    if (!std::isfinite(lg.loss)) throw RuntimeError("train: non-finite loss at iteration " + std::to_string(it));
    adam_step(adam, ck.params, lg.grad);
    ema_update(ck.ema, ck.params, cfg.ema_decay);
    const LossRecord rec{it, lg.loss / cfg.batch, sigma_sum / cfg.batch};
    out.trace.push_back(rec);
    if (progress) progress(rec);
  }
  return out;
}

}  // namespace pfgmpp
