#pragma once

// Run configuration: JSON schema with unknown-key rejection, defaults, and
// the canonical echo written into every manifest.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfgmpp/analysis.hpp"
#include "pfgmpp/datasets.hpp"
#include "pfgmpp/denoiser.hpp"
#include "pfgmpp/sampler.hpp"
#include "pfgmpp/trainer.hpp"

namespace pfgmpp {

inline constexpr const char* kVersion = "0.1.0";

enum class Mode { Verify, Train, Sample, Analyze, Robustness };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::Verify: return "verify";
    case Mode::Train: return "train";
    case Mode::Sample: return "sample";
    case Mode::Analyze: return "analyze";
    case Mode::Robustness: return "robustness";
  }
  return "verify";
}

inline Mode mode_from_string(const std::string& s) {
  for (Mode m : {Mode::Verify, Mode::Train, Mode::Sample, Mode::Analyze, Mode::Robustness})
    if (to_string(m) == s) return m;
  throw ValidationError("mode: expected verify | train | sample | analyze | robustness, got '" + s + "'");
}

struct SamplerConfig {
  double sigma_max = 80.0;
  double sigma_min = 0.002;
  double rho = 7.0;
  int steps = 18;
  int count = 4096;
  double alpha = 0.0;
  NoiseScale noise_scale = NoiseScale::StdDev;
  /// "oracle" (exact field of the dataset) or "checkpoint".
  std::string backend = "checkpoint";
  std::string checkpoint = "checkpoint.json";
  bool use_ema = true;
  /// Chains whose full trajectory is written (0 disables).
  int trajectory_chains = 0;
};

struct AnalysisConfig {
  double sigma = 0.5;
  std::vector<double> tvd_d_list{64.0, 2048.0};
  int tvd_probes = 2000;
  std::vector<double> variance_d_list{8.0, 64.0, 512.0, 4096.0};
  int variance_samples = 100000;
  std::vector<double> convergence_d_list{16.0, 256.0, 4096.0, 65536.0, 1048576.0};
  int convergence_probes = 256;
  double ratio_l = 1.0;
  int ratio_n = 64;
  double ratio_d = 1024.0;
  int ratio_trials = 2000;
};

/// One robustness / NFE sweep model: an oracle at d_aug or a checkpoint.
struct SweepModelConfig {
  std::string label;
  std::string backend = "oracle";
  nlohmann::json d_aug = 64.0;  // number or "gaussian"; ignored for checkpoints
  std::string checkpoint;
};

struct RobustnessConfig {
  std::vector<SweepModelConfig> models{{"oracle-d64", "oracle", 64.0, ""},
                                       {"oracle-gaussian", "oracle", "gaussian", ""}};
  std::vector<double> alphas{0.0, 0.1, 0.2, 0.4};
  std::vector<int> steps_list{4, 8, 16, 32};
  int count = 4096;
  int n_proj = 64;
  std::uint64_t reference_seed = 202;
};

struct VerifyConfig {
  /// Criterion ids to run; empty runs all of them.
  std::vector<std::string> criteria;
  bool include_training = true;
};

struct RunConfig {
  Mode mode = Mode::Verify;
  std::uint64_t seed = 0;
  std::string out = "runs/default";
  SpaceConfig space = SpaceConfig::finite(2, 128.0);
  DatasetSpec dataset;
  TrainConfig train;
  SamplerConfig sampler;
  AnalysisConfig analysis;
  RobustnessConfig robustness;
  VerifyConfig verify;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> keys) {
  require(j.is_object(), where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    require(known, where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const nlohmann::json& j, const char* key, const std::string& where, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(where + "." + key + ": wrong type");
  }
}

// Integers must be JSON integers; doubles accept any number.
inline void read_int(const nlohmann::json& j, const char* key, const std::string& where, long& out) {
  if (!j.contains(key)) return;
  require(j.at(key).is_number_integer(), where + "." + key + ": expected an integer");
  out = j.at(key).get<long>();
}

inline void read_int(const nlohmann::json& j, const char* key, const std::string& where, int& out) {
  long v = out;
  read_int(j, key, where, v);
  out = static_cast<int>(v);
}

inline void read_seed(const nlohmann::json& j, const char* key, const std::string& where, std::uint64_t& out) {
  if (!j.contains(key)) return;
  require(j.at(key).is_number_unsigned() || (j.at(key).is_number_integer() && j.at(key).get<long>() >= 0),
          where + "." + key + ": expected a nonnegative integer");
  out = j.at(key).get<std::uint64_t>();
}

inline void read_double(const nlohmann::json& j, const char* key, const std::string& where, double& out) {
  if (!j.contains(key)) return;
  require(j.at(key).is_number(), where + "." + key + ": expected a number");
  out = j.at(key).get<double>();
}

inline nlohmann::json d_aug_json(const SpaceConfig& s) { return space_to_json(s)["d_aug"]; }

inline std::string noise_scale_name(NoiseScale s) { return s == NoiseScale::StdDev ? "std" : "variance"; }

inline NoiseScale noise_scale_from(const std::string& s) {
  if (s == "std") return NoiseScale::StdDev;
  if (s == "variance") return NoiseScale::Variance;
  throw ValidationError("sampler.noise_scale: expected \"std\" or \"variance\"");
}

}  // namespace detail

/// Canonical JSON form with every field present.
inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  json ds{{"name", c.dataset.name},     {"count", c.dataset.count}, {"seed", c.dataset.seed},
          {"modes", c.dataset.modes},   {"radius", c.dataset.radius}, {"std", c.dataset.std},
          {"noise", c.dataset.noise},   {"point", c.dataset.point}, {"path", c.dataset.path}};
  const TrainConfig& t = c.train;
  json tr{{"objective", to_string(t.objective)},
          {"p_mean", t.p_mean},
          {"p_std", t.p_std},
          {"batch", t.batch},
          {"iterations", t.iterations},
          {"lr", t.lr},
          {"ema_decay", t.ema_decay},
          {"sigma_data", t.sigma_data},
          {"hidden", t.hidden},
          {"beta_bar_min", t.beta_bar_min},
          {"beta_bar_max", t.beta_bar_max},
          {"ddpm_t_min", t.ddpm_t_min}};
  const SamplerConfig& s = c.sampler;
  json sm{{"sigma_max", s.sigma_max},
          {"sigma_min", s.sigma_min},
          {"rho", s.rho},
          {"steps", s.steps},
          {"count", s.count},
          {"alpha", s.alpha},
          {"noise_scale", detail::noise_scale_name(s.noise_scale)},
          {"backend", s.backend},
          {"checkpoint", s.checkpoint},
          {"use_ema", s.use_ema},
          {"trajectory_chains", s.trajectory_chains}};
  const AnalysisConfig& a = c.analysis;
  json an{{"sigma", a.sigma},
          {"tvd_d_list", a.tvd_d_list},
          {"tvd_probes", a.tvd_probes},
          {"variance_d_list", a.variance_d_list},
          {"variance_samples", a.variance_samples},
          {"convergence_d_list", a.convergence_d_list},
          {"convergence_probes", a.convergence_probes},
          {"ratio_l", a.ratio_l},
          {"ratio_n", a.ratio_n},
          {"ratio_d", a.ratio_d},
          {"ratio_trials", a.ratio_trials}};
  json models = json::array();
  for (const auto& m : c.robustness.models)
    models.push_back({{"label", m.label}, {"backend", m.backend}, {"d_aug", m.d_aug}, {"checkpoint", m.checkpoint}});
  json rb{{"models", models},
          {"alphas", c.robustness.alphas},
          {"steps_list", c.robustness.steps_list},
          {"count", c.robustness.count},
          {"n_proj", c.robustness.n_proj},
          {"reference_seed", c.robustness.reference_seed}};
  json vf{{"criteria", c.verify.criteria}, {"include_training", c.verify.include_training}};
  return json{{"mode", to_string(c.mode)}, {"seed", c.seed},      {"out", c.out},       {"space", space_to_json(c.space)},
              {"dataset", ds},             {"train", tr},         {"sampler", sm},      {"analysis", an},
              {"robustness", rb},          {"verify", vf}};
}

/// Parses a (possibly partial) config over the defaults. Unknown keys and
/// wrongly typed values throw ValidationError; the result is validated.
inline RunConfig config_from_json(const nlohmann::json& j) {
  using detail::read;
  using detail::read_double;
  using detail::read_int;
  using detail::read_seed;
  RunConfig c;
  detail::check_keys(j, "config",
                     {"mode", "seed", "out", "space", "dataset", "train", "sampler", "analysis", "robustness", "verify"});
  if (j.contains("mode")) {
    require(j["mode"].is_string(), "config.mode: expected a string");
    c.mode = mode_from_string(j["mode"].get<std::string>());
  }
  read_seed(j, "seed", "config", c.seed);
  read(j, "out", "config", c.out);
  if (j.contains("space")) c.space = space_from_json(j["space"]);

  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    detail::check_keys(d, "dataset", {"name", "count", "seed", "modes", "radius", "std", "noise", "point", "path"});
    read(d, "name", "dataset", c.dataset.name);
    read_int(d, "count", "dataset", c.dataset.count);
    read_seed(d, "seed", "dataset", c.dataset.seed);
    read_int(d, "modes", "dataset", c.dataset.modes);
    read_double(d, "radius", "dataset", c.dataset.radius);
    read_double(d, "std", "dataset", c.dataset.std);
    read_double(d, "noise", "dataset", c.dataset.noise);
    read(d, "point", "dataset", c.dataset.point);
    read(d, "path", "dataset", c.dataset.path);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    detail::check_keys(t, "train",
                       {"objective", "p_mean", "p_std", "batch", "iterations", "lr", "ema_decay", "sigma_data",
                        "hidden", "beta_bar_min", "beta_bar_max", "ddpm_t_min"});
    if (t.contains("objective")) {
      require(t["objective"] == "edm" || t["objective"] == "ddpm", "train.objective: expected \"edm\" or \"ddpm\"");
      c.train.objective = t["objective"] == "edm" ? Objective::Edm : Objective::Ddpm;
    }
    read_double(t, "p_mean", "train", c.train.p_mean);
    read_double(t, "p_std", "train", c.train.p_std);
    read_int(t, "batch", "train", c.train.batch);
    read_int(t, "iterations", "train", c.train.iterations);
    read_double(t, "lr", "train", c.train.lr);
    read_double(t, "ema_decay", "train", c.train.ema_decay);
    read_double(t, "sigma_data", "train", c.train.sigma_data);
    read(t, "hidden", "train", c.train.hidden);
    read_double(t, "beta_bar_min", "train", c.train.beta_bar_min);
    read_double(t, "beta_bar_max", "train", c.train.beta_bar_max);
    read_double(t, "ddpm_t_min", "train", c.train.ddpm_t_min);
  }
  if (j.contains("sampler")) {
    const auto& s = j["sampler"];
    detail::check_keys(s, "sampler",
                       {"sigma_max", "sigma_min", "rho", "steps", "count", "alpha", "noise_scale", "backend",
                        "checkpoint", "use_ema", "trajectory_chains"});
    read_double(s, "sigma_max", "sampler", c.sampler.sigma_max);
    read_double(s, "sigma_min", "sampler", c.sampler.sigma_min);
    read_double(s, "rho", "sampler", c.sampler.rho);
    read_int(s, "steps", "sampler", c.sampler.steps);
    read_int(s, "count", "sampler", c.sampler.count);
    read_double(s, "alpha", "sampler", c.sampler.alpha);
    if (s.contains("noise_scale")) {
      require(s["noise_scale"].is_string(), "sampler.noise_scale: expected a string");
      c.sampler.noise_scale = detail::noise_scale_from(s["noise_scale"].get<std::string>());
    }
    read(s, "backend", "sampler", c.sampler.backend);
    read(s, "checkpoint", "sampler", c.sampler.checkpoint);
    read(s, "use_ema", "sampler", c.sampler.use_ema);
    read_int(s, "trajectory_chains", "sampler", c.sampler.trajectory_chains);
  }
  if (j.contains("analysis")) {
    const auto& a = j["analysis"];
    detail::check_keys(a, "analysis",
                       {"sigma", "tvd_d_list", "tvd_probes", "variance_d_list", "variance_samples",
                        "convergence_d_list", "convergence_probes", "ratio_l", "ratio_n", "ratio_d", "ratio_trials"});
    read_double(a, "sigma", "analysis", c.analysis.sigma);
    read(a, "tvd_d_list", "analysis", c.analysis.tvd_d_list);
    read_int(a, "tvd_probes", "analysis", c.analysis.tvd_probes);
    read(a, "variance_d_list", "analysis", c.analysis.variance_d_list);
    read_int(a, "variance_samples", "analysis", c.analysis.variance_samples);
    read(a, "convergence_d_list", "analysis", c.analysis.convergence_d_list);
    read_int(a, "convergence_probes", "analysis", c.analysis.convergence_probes);
    read_double(a, "ratio_l", "analysis", c.analysis.ratio_l);
    read_int(a, "ratio_n", "analysis", c.analysis.ratio_n);
    read_double(a, "ratio_d", "analysis", c.analysis.ratio_d);
    read_int(a, "ratio_trials", "analysis", c.analysis.ratio_trials);
  }
  if (j.contains("robustness")) {
    const auto& r = j["robustness"];
    detail::check_keys(r, "robustness", {"models", "alphas", "steps_list", "count", "n_proj", "reference_seed"});
    if (r.contains("models")) {
      require(r["models"].is_array(), "robustness.models: expected an array");
      c.robustness.models.clear();
      for (const auto& m : r["models"]) {
        detail::check_keys(m, "robustness.models[]", {"label", "backend", "d_aug", "checkpoint"});
        SweepModelConfig mc;
        read(m, "label", "robustness.models[]", mc.label);
        read(m, "backend", "robustness.models[]", mc.backend);
        if (m.contains("d_aug")) mc.d_aug = m["d_aug"];
        read(m, "checkpoint", "robustness.models[]", mc.checkpoint);
        c.robustness.models.push_back(mc);
      }
    }
    read(r, "alphas", "robustness", c.robustness.alphas);
    read(r, "steps_list", "robustness", c.robustness.steps_list);
    read_int(r, "count", "robustness", c.robustness.count);
    read_int(r, "n_proj", "robustness", c.robustness.n_proj);
    read_seed(r, "reference_seed", "robustness", c.robustness.reference_seed);
  }
  if (j.contains("verify")) {
    const auto& v = j["verify"];
    detail::check_keys(v, "verify", {"criteria", "include_training"});
    read(v, "criteria", "verify", c.verify.criteria);
    read(v, "include_training", "verify", c.verify.include_training);
  }
  c.train.space = c.space;
  c.train.seed = c.seed;
  return c;
}

inline void validate(const RunConfig& c) {
  c.train.validate();
  require(c.space.n() >= 1, "space.n_data must be >= 1");
  const auto& names = dataset_names();
  require(std::find(names.begin(), names.end(), c.dataset.name) != names.end(),
          "dataset.name: unknown generator '" + c.dataset.name + "'");
  require(c.dataset.count >= 1, "dataset.count must be >= 1");
  const SamplerConfig& s = c.sampler;
  require(s.sigma_max > s.sigma_min && s.sigma_min > 0.0, "sampler: need sigma_max > sigma_min > 0");
  require(s.rho > 0.0, "sampler.rho must be > 0");
  require(s.steps >= 2, "sampler.steps must be >= 2");
  require(s.count >= 1, "sampler.count must be >= 1");
  require(s.alpha >= 0.0, "sampler.alpha must be >= 0");
  require(s.backend == "oracle" || s.backend == "checkpoint", "sampler.backend: expected \"oracle\" or \"checkpoint\"");
  require(s.trajectory_chains >= 0 && s.trajectory_chains <= s.count,
          "sampler.trajectory_chains must be in [0, count]");
  const AnalysisConfig& a = c.analysis;
  require(a.sigma > 0.0, "analysis.sigma must be > 0");
  require(a.tvd_probes >= 1 && a.convergence_probes >= 1 && a.ratio_trials >= 1,
          "analysis: probe and trial counts must be >= 1");
  require(a.variance_samples >= 2, "analysis.variance_samples must be >= 2");
  require(a.ratio_n >= 1 && a.ratio_d > 1.0 && a.ratio_l >= 0.0, "analysis: invalid posterior-ratio settings");
  const RobustnessConfig& r = c.robustness;
  require(!r.models.empty(), "robustness.models must be nonempty");
  for (const auto& m : r.models) {
    require(!m.label.empty(), "robustness.models[].label must be nonempty");
    require(m.backend == "oracle" || m.backend == "checkpoint",
            "robustness.models[].backend: expected \"oracle\" or \"checkpoint\"");
    if (m.backend == "oracle")
      space_from_json(nlohmann::json{{"n_data", c.space.n()}, {"d_aug", m.d_aug}});
    else
      require(!m.checkpoint.empty(), "robustness.models[].checkpoint is required for checkpoint models");
  }
  for (double al : r.alphas) require(al >= 0.0, "robustness.alphas must be >= 0");
  for (int t : r.steps_list) require(t >= 2, "robustness.steps_list entries must be >= 2");
  require(r.count >= 1 && r.n_proj >= 1, "robustness: count and n_proj must be >= 1");
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: malformed JSON: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace pfgmpp
