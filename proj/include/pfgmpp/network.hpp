#pragma once

// Small fully-connected network with hand-written reverse mode, the EDM
// preconditioner, Adam and a constant-decay parameter EMA.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "pfgmpp/rng.hpp"
#include "pfgmpp/types.hpp"

namespace pfgmpp {

/// Weights and biases of an MLP; weights[l] is (out x in).
struct NetworkParams {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  std::size_t num_layers() const { return weights.size(); }
  int input_size() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }
  int output_size() const { return weights.empty() ? 0 : static_cast<int>(weights.back().rows()); }

  Eigen::Index num_parameters() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  NetworkParams zeros_like() const {
    NetworkParams z;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      z.weights.push_back(Matrix::Zero(weights[l].rows(), weights[l].cols()));
      z.biases.push_back(Vector::Zero(biases[l].size()));
    }
    return z;
  }

  bool same_shape(const NetworkParams& o) const {
    if (o.weights.size() != weights.size() || o.biases.size() != biases.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (o.weights[l].rows() != weights[l].rows() || o.weights[l].cols() != weights[l].cols()) return false;
      if (o.biases[l].size() != biases[l].size()) return false;
    }
    return true;
  }

  Vector flatten() const {
    Vector out(num_parameters());
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.segment(k, weights[l].size()) = weights[l].reshaped();
      k += weights[l].size();
      out.segment(k, biases[l].size()) = biases[l];
      k += biases[l].size();
    }
    return out;
  }

  void assign_flat(const Vector& flat) {
    require(flat.size() == num_parameters(), "assign_flat: size mismatch");
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l].reshaped() = flat.segment(k, weights[l].size());
      k += weights[l].size();
      biases[l] = flat.segment(k, biases[l].size());
      k += biases[l].size();
    }
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l)
      if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    return true;
  }

  bool operator==(const NetworkParams& o) const {
    if (!same_shape(o)) return false;
    for (std::size_t l = 0; l < weights.size(); ++l)
      if (weights[l] != o.weights[l] || biases[l] != o.biases[l]) return false;
    return true;
  }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
inline NetworkParams init_network(int input, const std::vector<int>& hidden, int output, std::uint64_t seed) {
  require(input >= 1 && output >= 1, "init_network: sizes must be >= 1");
  Engine rng(seed);
  NetworkParams p;
  int fan_in = input;
  std::vector<int> sizes = hidden;
  sizes.push_back(output);
  for (int width : sizes) {
    require(width >= 1, "init_network: hidden widths must be >= 1");
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix w(width, fan_in);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
    Vector b(width);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = u(rng);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
    fan_in = width;
  }
  return p;
}

namespace activation {
inline Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& z) { return 1.0 / (1.0 + (-z).exp()); }
}  // namespace activation

/// Activations cached by forward() for the backward pass. Columns are batch entries.
struct ForwardCache {
  std::vector<Matrix> inputs;           // input to each linear layer
  std::vector<Matrix> pre_activations;  // output of each hidden linear layer
  Matrix output;
};

/// Linear -> SiLU -> ... -> Linear, batched over columns.
inline Matrix forward(const NetworkParams& p, const Matrix& input, ForwardCache* cache = nullptr) {
  require(input.rows() == p.input_size(), "forward: input size mismatch");
  Matrix a = input;
  if (cache) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  const std::size_t last = p.num_layers() - 1;
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    if (cache) cache->inputs.push_back(a);
    Matrix z = p.weights[l] * a;
    z.colwise() += p.biases[l];
    if (l == last) {
      a = std::move(z);
    } else {
      const Eigen::ArrayXXd za = z.array();
      a = (za * activation::sigmoid(za)).matrix();
      if (cache) cache->pre_activations.push_back(std::move(z));
    }
  }
  if (cache) cache->output = a;
  return a;
}

inline Vector forward(const NetworkParams& p, const Vector& input) {
  return forward(p, Matrix(input), nullptr).col(0);
}

/// Reverse pass: accumulates dL/dθ into grad given dL/d(output).
/// Returns dL/d(input).
inline Matrix backward(const NetworkParams& p, const ForwardCache& cache, const Matrix& grad_output,
                       NetworkParams& grad) {
  require(grad.same_shape(p), "backward: gradient shape mismatch");
  Matrix delta = grad_output;
  for (std::size_t l = p.num_layers(); l-- > 0;) {
    grad.weights[l].noalias() += delta * cache.inputs[l].transpose();
    grad.biases[l] += delta.rowwise().sum();
    Matrix upstream = p.weights[l].transpose() * delta;
    if (l > 0) {
      // d/dz [z * sigmoid(z)] = s (1 + z (1 - s))
      const Eigen::ArrayXXd z = cache.pre_activations[l - 1].array();
      const Eigen::ArrayXXd s = activation::sigmoid(z);
      upstream = (upstream.array() * (s * (1.0 + z * (1.0 - s)))).matrix();
    }
    delta = std::move(upstream);
  }
  return delta;
}

/// EDM preconditioning as functions of sigma.
struct Preconditioner {
  double sigma_data = 0.5;

  double c_in(double sigma) const { return 1.0 / std::sqrt(sigma * sigma + sigma_data * sigma_data); }
  double c_out(double sigma) const {
    return sigma * sigma_data / std::sqrt(sigma * sigma + sigma_data * sigma_data);
  }
  double c_skip(double sigma) const {
    return sigma_data * sigma_data / (sigma * sigma + sigma_data * sigma_data);
  }
  double c_noise(double sigma) const { return 0.25 * std::log(sigma); }
  /// Loss weight 1 / c_out^2.
  double lambda(double sigma) const {
    const double c = c_out(sigma);
    return 1.0 / (c * c);
  }
};

struct AdamState {
  NetworkParams m;
  NetworkParams v;
  long step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const NetworkParams& p, double lr = 1e-4) {
    AdamState s;
    s.m = p.zeros_like();
    s.v = p.zeros_like();
    s.lr = lr;
    return s;
  }
};

/// One bias-corrected Adam update, in place.
inline void adam_step(AdamState& state, NetworkParams& params, const NetworkParams& grad) {
  require(params.same_shape(grad) && params.same_shape(state.m) && params.same_shape(state.v),
          "adam_step: shape mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = (state.beta2 * v.array() + (1.0 - state.beta2) * g.array().square()).matrix();
    theta.array() -= state.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.eps);
  };
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    update(params.weights[l], grad.weights[l], state.m.weights[l], state.v.weights[l]);
    update(params.biases[l], grad.biases[l], state.m.biases[l], state.v.biases[l]);
  }
}

/// ema <- decay * ema + (1 - decay) * params.
inline void ema_update(NetworkParams& ema, const NetworkParams& params, double decay) {
  require(decay >= 0.0 && decay < 1.0, "ema_update: decay must be in [0, 1)");
  require(ema.same_shape(params), "ema_update: shape mismatch");
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    ema.weights[l] = decay * ema.weights[l] + (1.0 - decay) * params.weights[l];
    ema.biases[l] = decay * ema.biases[l] + (1.0 - decay) * params.biases[l];
  }
}

}  // namespace pfgmpp
