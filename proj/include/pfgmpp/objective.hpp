#pragma once

// Training targets and the exact minimizer they regress to.

#include <cmath>
#include <vector>

#include "pfgmpp/field.hpp"
#include "pfgmpp/network.hpp"
#include "pfgmpp/types.hpp"

namespace pfgmpp {

/// Normalized target (x - y) * sqrt(D) / r. The augmentation component of the
/// full target is the constant sqrt(D) and is not returned.
inline Vector pfgmpp_target(const Vector& x, const Vector& y, double r, const SpaceConfig& space) {
  check_dim(x, space.n(), "pfgmpp_target x");
  check_dim(y, space.n(), "pfgmpp_target y");
  require(r > 0.0, "pfgmpp_target: r must be > 0");
  return (x - y) * space.target_scale(r);
}

inline Vector dsm_target(const Vector& x, const Vector& y, double sigma) {
  require(x.size() == y.size(), "dsm_target: dimension mismatch");
  require(sigma > 0.0, "dsm_target: sigma must be > 0");
  return (x - y) / sigma;
}

struct TrainingPair {
  Vector clean;
  AugmentedPoint perturbed;
  Vector target;
};

inline TrainingPair make_pair_from(const Vector& y, const AugmentedPoint& p, const SpaceConfig& space) {
  return TrainingPair{y, p, pfgmpp_target(p.x, y, p.r, space)};
}

/// Conditional expectation of the normalized target given (x, r):
/// sum_i w_i (x - y_i) sqrt(D) / r with posterior weights w.
inline Vector minimizer_oracle(const AugmentedPoint& p, const DataCloud& cloud, const SpaceConfig& space) {
  require(p.r > 0.0, "minimizer_oracle: r must be > 0");
  const Vector w = posterior_weights(p, cloud, space);
  return (p.x - cloud.points() * w) * space.target_scale(p.r);
}

/// Large-batch target: kernel-posterior weights restricted to {y1} ∪ aux.
inline Vector stf_target(const AugmentedPoint& p, const Vector& y1, const std::vector<Vector>& aux,
                         const SpaceConfig& space) {
  require(p.r > 0.0, "stf_target: r must be > 0");
  std::vector<Vector> batch;
  batch.reserve(aux.size() + 1);
  batch.push_back(y1);
  batch.insert(batch.end(), aux.begin(), aux.end());
  const DataCloud local = DataCloud::from_points(batch);
  const Vector w = posterior_weights(p, local, space);
  return (p.x - local.points() * w) * space.target_scale(p.r);
}

struct LossGrad {
  double loss = 0.0;
  NetworkParams grad;
};

/// Sum over the batch of |F(c_in x, c_noise) - (y - c_skip x) / c_out|^2 at
/// sigma = r / sqrt(D). The weight lambda(sigma) c_out(sigma)^2 is identically
/// one and is not formed.
inline LossGrad preconditioned_loss(const NetworkParams& net, const Preconditioner& pre,
                                    const std::vector<TrainingPair>& batch, const SpaceConfig& space) {
  require(!batch.empty(), "preconditioned_loss: empty batch");
  const int n = space.n();
  const auto b = static_cast<Eigen::Index>(batch.size());
  Matrix input(n + 1, b);
  Matrix target(n, b);
  for (Eigen::Index k = 0; k < b; ++k) {
    const TrainingPair& tp = batch[static_cast<std::size_t>(k)];
    check_dim(tp.perturbed.x, n, "preconditioned_loss x");
    check_dim(tp.clean, n, "preconditioned_loss y");
    require(tp.perturbed.r > 0.0, "preconditioned_loss: r must be > 0");
    const double sigma = space.sigma_for_anchor(tp.perturbed.r);
    input.col(k).head(n) = pre.c_in(sigma) * tp.perturbed.x;
    input(n, k) = pre.c_noise(sigma);
    target.col(k) = (tp.clean - pre.c_skip(sigma) * tp.perturbed.x) / pre.c_out(sigma);
  }
  ForwardCache cache;
  const Matrix residual = forward(net, input, &cache) - target;
  LossGrad out;
  out.loss = residual.squaredNorm();
  out.grad = net.zeros_like();
  backward(net, cache, 2.0 * residual, out.grad);
  return out;
}

/// DDPM-transferred pair: network input sqrt(alpha_t) (y + R v) and time t,
/// regressed onto sqrt(D) R v / r.
struct DdpmPair {
  Vector input;
  double t = 0.0;
  Vector target;
};

/// Unweighted raw-network square loss for DDPM-transferred training.
inline LossGrad ddpm_loss(const NetworkParams& net, const std::vector<DdpmPair>& batch) {
  require(!batch.empty(), "ddpm_loss: empty batch");
  const auto n = batch.front().input.size();
  const auto b = static_cast<Eigen::Index>(batch.size());
  Matrix input(n + 1, b);
  Matrix target(n, b);
  for (Eigen::Index k = 0; k < b; ++k) {
    const DdpmPair& dp = batch[static_cast<std::size_t>(k)];
    require(dp.input.size() == n && dp.target.size() == n, "ddpm_loss: dimension mismatch");
    input.col(k).head(n) = dp.input;
    input(n, k) = dp.t;
    target.col(k) = dp.target;
  }
  ForwardCache cache;
  const Matrix residual = forward(net, input, &cache) - target;
  LossGrad out;
  out.loss = residual.squaredNorm();
  out.grad = net.zeros_like();
  backward(net, cache, 2.0 * residual, out.grad);
  return out;
}

}  // namespace pfgmpp
