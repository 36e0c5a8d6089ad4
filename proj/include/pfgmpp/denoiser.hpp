#pragma once

// Preconditioned denoiser D(x, r) = c_skip x + c_out F(c_in x, c_noise) at
// sigma = r / sqrt(D), its gradient, and the JSON checkpoint container.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfgmpp/network.hpp"
#include "pfgmpp/objective.hpp"
#include "pfgmpp/types.hpp"

namespace pfgmpp {

/// Default architecture: three hidden layers of width 128.
inline const std::vector<int>& default_hidden() {
  static const std::vector<int> h{128, 128, 128};
  return h;
}

class Denoiser {
 public:
  Denoiser(NetworkParams params, Preconditioner pre, SpaceConfig space)
      : params_(std::move(params)), pre_(pre), space_(space) {
    require(params_.input_size() == space_.n() + 1, "Denoiser: network input must be N + 1");
    require(params_.output_size() == space_.n(), "Denoiser: network output must be N");
  }

  static Denoiser initialize(const SpaceConfig& space, const std::vector<int>& hidden, std::uint64_t seed,
                             Preconditioner pre = {}) {
    return Denoiser(init_network(space.n() + 1, hidden, space.n(), seed), pre, space);
  }

  const NetworkParams& params() const { return params_; }
  NetworkParams& params() { return params_; }
  const Preconditioner& preconditioner() const { return pre_; }
  const SpaceConfig& space() const { return space_; }

  /// Batched denoiser output, one point per column, all at anchor r.
  Matrix denoise_batch(const Matrix& xs, double r) const {
    require(r > 0.0, "denoise: r must be > 0");
    require(xs.rows() == space_.n(), "denoise: dimension mismatch");
    const double sigma = space_.sigma_for_anchor(r);
    Matrix input(space_.n() + 1, xs.cols());
    input.topRows(space_.n()) = pre_.c_in(sigma) * xs;
    input.row(space_.n()).setConstant(pre_.c_noise(sigma));
    return pre_.c_skip(sigma) * xs + pre_.c_out(sigma) * forward(params_, input);
  }

  Vector denoise(const Vector& x, double r) const {
    check_dim(x, space_.n(), "denoise");
    return denoise_batch(Matrix(x), r).col(0);
  }

  /// Normalized field estimate (x - D(x, r)) sqrt(D) / r.
  Vector field_estimate(const Vector& x, double r) const {
    return (x - denoise(x, r)) * space_.target_scale(r);
  }

  LossGrad loss_and_grad(const std::vector<TrainingPair>& batch) const {
    LossGrad lg = preconditioned_loss(params_, pre_, batch, space_);
    if (!std::isfinite(lg.loss)) throw RuntimeError("loss_and_grad: non-finite loss");
    return lg;
  }

 private:
  NetworkParams params_;
  Preconditioner pre_;
  SpaceConfig space_;
};

/// Callable adapter for DenoiserBackend; holds its own copy of the model.
inline auto denoise_fn(Denoiser d) {
  return [d = std::move(d)](const Matrix& xs, double r) { return d.denoise_batch(xs, r); };
}

// --- JSON helpers -----------------------------------------------------------

inline nlohmann::json space_to_json(const SpaceConfig& s) {
  nlohmann::json j;
  j["n_data"] = s.n();
  if (s.is_gaussian()) {
    j["d_aug"] = "gaussian";
  } else {
    j["d_aug"] = s.d();
  }
  return j;
}

inline SpaceConfig space_from_json(const nlohmann::json& j) {
  require(j.is_object(), "space: expected an object");
  for (const auto& [key, _] : j.items())
    require(key == "n_data" || key == "d_aug", "space: unknown key '" + key + "'");
  require(j.contains("n_data") && j["n_data"].is_number_integer(), "space.n_data: expected an integer");
  const int n = j["n_data"].get<int>();
  require(j.contains("d_aug"), "space.d_aug: missing");
  const auto& d = j["d_aug"];
  if (d.is_string()) {
    require(d.get<std::string>() == "gaussian", "space.d_aug: expected a positive number or \"gaussian\"");
    return SpaceConfig::gaussian(n);
  }
  require(d.is_number(), "space.d_aug: expected a positive number or \"gaussian\"");
  return SpaceConfig::finite(n, d.get<double>());
}

namespace detail {
inline void append_arrays(nlohmann::json& arrays, const std::string& prefix, const NetworkParams& p) {
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    const Matrix& w = p.weights[l];
    arrays.push_back({{"name", prefix + ".layer" + std::to_string(l) + ".weight"},
                      {"shape", {w.rows(), w.cols()}},
                      {"data", std::vector<double>(w.data(), w.data() + w.size())}});
    const Vector& b = p.biases[l];
    arrays.push_back({{"name", prefix + ".layer" + std::to_string(l) + ".bias"},
                      {"shape", {b.size()}},
                      {"data", std::vector<double>(b.data(), b.data() + b.size())}});
  }
}

inline NetworkParams read_arrays(const nlohmann::json& arrays, const std::string& prefix) {
  NetworkParams p;
  for (std::size_t l = 0;; ++l) {
    const std::string wname = prefix + ".layer" + std::to_string(l) + ".weight";
    const std::string bname = prefix + ".layer" + std::to_string(l) + ".bias";
    const nlohmann::json* wj = nullptr;
    const nlohmann::json* bj = nullptr;
    for (const auto& a : arrays) {
      if (a.at("name") == wname) wj = &a;
      if (a.at("name") == bname) bj = &a;
    }
    if (!wj) break;
    if (!bj) throw ValidationError("checkpoint: missing array " + bname);
    const auto shape = wj->at("shape").get<std::vector<Eigen::Index>>();
    const auto wdata = wj->at("data").get<std::vector<double>>();
    if (shape.size() != 2 || static_cast<Eigen::Index>(wdata.size()) != shape[0] * shape[1])
      throw ValidationError("checkpoint: bad shape for " + wname);
    p.weights.push_back(Eigen::Map<const Matrix>(wdata.data(), shape[0], shape[1]));
    const auto bdata = bj->at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(bdata.size()) != shape[0])
      throw ValidationError("checkpoint: bad shape for " + bname);
    p.biases.push_back(Eigen::Map<const Vector>(bdata.data(), static_cast<Eigen::Index>(bdata.size())));
  }
  if (p.weights.empty()) throw ValidationError("checkpoint: no arrays with prefix '" + prefix + "'");
  return p;
}
}  // namespace detail

/// Everything needed to rebuild a trained model.
///
/// On disk: a JSON object with "format" = "pfgmpp-checkpoint", "version" = 1,
/// the embedded "space", "objective" ("edm" or "ddpm"), "sigma_data",
/// "beta_bar_min"/"beta_bar_max", "hidden", and "arrays": a flat list of
/// {name, shape, data} records (column-major) named params.layerK.weight,
/// params.layerK.bias, ema.layerK.weight, ema.layerK.bias.
struct Checkpoint {
  SpaceConfig space = SpaceConfig::gaussian(1);
  std::string objective = "edm";
  Preconditioner pre;
  double beta_bar_min = 0.1;
  double beta_bar_max = 20.0;
  std::vector<int> hidden;
  NetworkParams params;
  NetworkParams ema;

  Denoiser denoiser(bool use_ema = true) const { return Denoiser(use_ema ? ema : params, pre, space); }
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& c) {
  nlohmann::json j;
  j["format"] = "pfgmpp-checkpoint";
  j["version"] = 1;
  j["space"] = space_to_json(c.space);
  j["objective"] = c.objective;
  j["sigma_data"] = c.pre.sigma_data;
  j["beta_bar_min"] = c.beta_bar_min;
  j["beta_bar_max"] = c.beta_bar_max;
  j["hidden"] = c.hidden;
  j["activation"] = "silu";
  nlohmann::json arrays = nlohmann::json::array();
  detail::append_arrays(arrays, "params", c.params);
  detail::append_arrays(arrays, "ema", c.ema);
  j["arrays"] = std::move(arrays);
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "pfgmpp-checkpoint") throw ValidationError("checkpoint: unknown format");
    if (j.at("version") != 1) throw ValidationError("checkpoint: unsupported version");
    Checkpoint c;
    c.space = space_from_json(j.at("space"));
    c.objective = j.at("objective").get<std::string>();
    c.pre.sigma_data = j.at("sigma_data").get<double>();
    c.beta_bar_min = j.at("beta_bar_min").get<double>();
    c.beta_bar_max = j.at("beta_bar_max").get<double>();
    c.hidden = j.at("hidden").get<std::vector<int>>();
    c.params = detail::read_arrays(j.at("arrays"), "params");
    c.ema = detail::read_arrays(j.at("arrays"), "ema");
    if (!c.params.same_shape(c.ema)) throw ValidationError("checkpoint: params/ema shape mismatch");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(c).dump() << '\n';
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw RuntimeError("checkpoint not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot read checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace pfgmpp
