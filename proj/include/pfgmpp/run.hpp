#pragma once

// Mode dispatch for one run: every artifact goes under config.out together
// with manifest.json (config echo, version, seeds, outputs). Failures write
// error.json and map to exit codes 1 (validation) and 2 (runtime).

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfgmpp/acceptance.hpp"
#include "pfgmpp/analysis.hpp"
#include "pfgmpp/config.hpp"
#include "pfgmpp/datasets.hpp"
#include "pfgmpp/denoiser.hpp"
#include "pfgmpp/sampler.hpp"
#include "pfgmpp/trainer.hpp"

namespace pfgmpp {

namespace fs = std::filesystem;

/// Command-line overrides; applied after the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> mode;
};

/// Precedence: built-in defaults < config file < flags.
inline RunConfig resolve_config(const std::optional<fs::path>& config_path, const Overrides& o) {
  RunConfig c = config_path ? load_config(*config_path) : RunConfig{};
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.mode) c.mode = mode_from_string(*o.mode);
  c.train.space = c.space;
  c.train.seed = c.seed;
  return c;
}

namespace detail {

struct RunContext {
  const RunConfig& cfg;
  fs::path out;
  std::vector<std::string> outputs;
  std::ostream& log;

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(out / name, std::ios::binary);
    if (!f) throw RuntimeError("cannot write " + (out / name).string());
    f << content;
    outputs.push_back(name);
  }
  void write(const std::string& name, const csv::Writer& w) { write(name, w.str()); }
};

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

inline nlohmann::json manifest(const RunConfig& cfg, const std::vector<std::string>& outputs, const std::string& status) {
  return nlohmann::json{{"program", "pfgmpp"},
                        {"version", kVersion},
                        {"mode", to_string(cfg.mode)},
                        {"status", status},
                        {"seeds",
                         {{"run", cfg.seed},
                          {"dataset", cfg.dataset.seed},
                          {"reference", cfg.robustness.reference_seed}}},
                        {"config", to_json(cfg)},
                        {"outputs", outputs}};
}

inline TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t = cfg.train;
  t.space = cfg.space;
  t.seed = cfg.seed;
  return t;
}

inline Checkpoint load_matching_checkpoint(const std::string& path, const SpaceConfig& space) {
  Checkpoint ck = load_checkpoint(path);
  require(ck.space == space, "checkpoint " + path + " was trained for space (N=" + std::to_string(ck.space.n()) +
                                 ", D=" + ck.space.label() + "), config has (N=" + std::to_string(space.n()) +
                                 ", D=" + space.label() + ")");
  return ck;
}

inline void run_train(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const DataCloud cloud = make_dataset(cfg.dataset);
  require(cloud.dim() == cfg.space.n(), "dataset dimension does not match space.n_data");
  ctx.write("dataset.csv", csv::points_csv(cloud.points()));
  const TrainConfig t = train_config(cfg);
  const TrainResult res = train(cloud, t, [&](const LossRecord& rec) {
    if ((rec.iter + 1) % 1000 == 0 || rec.iter + 1 == t.iterations)
      ctx.log << "iter " << rec.iter + 1 << "/" << t.iterations << " loss " << rec.loss << '\n';
  });
  ctx.write("loss_trace.csv", loss_trace_csv(res.trace));
  ctx.write("checkpoint.json", checkpoint_to_json(res.checkpoint).dump() + "\n");
}

inline void run_sample(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const SamplerConfig& sc = cfg.sampler;
  HeunOptions opt;
  opt.alpha = sc.alpha;
  opt.noise_scale = sc.noise_scale;
  const SamplerSchedule sched = schedule_for_space(cfg.space, sc.sigma_max, sc.sigma_min, sc.rho, sc.steps);

  // Trajectories are recorded for the first k chains by regenerating them;
  // chain c always uses substream(seed, {c}), so they match samples.csv.
  auto heun = [&](const auto& backend) {
    ctx.write("samples.csv", csv::points_csv(generate(backend, sched, sc.count, cfg.seed, opt).final));
    if (sc.trajectory_chains > 0) {
      HeunOptions topt = opt;
      topt.record_trajectory = true;
      ctx.write("trajectory.csv",
                trajectory_csv(generate(backend, sched, sc.trajectory_chains, cfg.seed, topt), sched));
    }
  };

  if (sc.backend == "oracle") {
    const DataCloud cloud = make_dataset(cfg.dataset);
    require(cloud.dim() == cfg.space.n(), "dataset dimension does not match space.n_data");
    heun(OracleBackend(cloud, cfg.space));
    return;
  }

  const Checkpoint ck = load_matching_checkpoint(sc.checkpoint, cfg.space);
  const NetworkParams& net = sc.use_ema ? ck.ema : ck.params;
  if (ck.objective == "ddpm") {
    require(sc.alpha == 0.0, "sampler.alpha must be 0 for ddpm checkpoints");
    require(sc.trajectory_chains == 0, "sampler.trajectory_chains is not supported for ddpm checkpoints");
    const NoisePredictor f = [&](const Matrix& x, double t) {
      Matrix in(x.rows() + 1, x.cols());
      in.topRows(x.rows()) = x;
      in.row(x.rows()).setConstant(t);
      return forward(net, in);
    };
    const DdimConfig dc{ck.beta_bar_min, ck.beta_bar_max};
    Matrix prior(cfg.space.n(), sc.count);
    const double r_max = ddim_r_max(dc, cfg.space);
    for (int c = 0; c < sc.count; ++c) {
      Engine rng = substream(cfg.seed, {static_cast<std::uint64_t>(c)});
      prior.col(c) = sample_prior(rng, r_max, cfg.space).x;
    }
    ctx.write("samples.csv", csv::points_csv(ddim_transfer_solve(f, dc, cfg.space, prior, sc.steps)));
    return;
  }
  const Denoiser den(net, ck.pre, ck.space);
  heun(DenoiserBackend(denoise_fn(den), cfg.space));
}

inline void run_analyze(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const AnalysisConfig& a = cfg.analysis;
  const DataCloud cloud = make_dataset(cfg.dataset);
  require(cloud.dim() == cfg.space.n(), "dataset dimension does not match space.n_data");

  csv::Writer tvd({"D", "sigma", "r", "tvd"});
  std::vector<SpaceConfig> spaces;
  for (double d : a.tvd_d_list) spaces.push_back(SpaceConfig::finite(cloud.dim(), d));
  spaces.push_back(SpaceConfig::gaussian(cloud.dim()));
  for (std::size_t k = 0; k < spaces.size(); ++k) {
    Engine rng = substream(cfg.seed, {1, k});
    const double r = spaces[k].anchor_for_sigma(a.sigma);
    tvd.row_strings({spaces[k].label(), csv::format_double(a.sigma), csv::format_double(r),
                     csv::format_double(tvd_phase(cloud, r, a.tvd_probes, rng, spaces[k]))});
  }
  ctx.write("tvd.csv", tvd);

  csv::Writer var({"D", "sigma", "variance", "computed"});
  for (const auto& p :
       radius_variance_curve(cloud.dim(), a.sigma, a.variance_d_list, a.variance_samples, splitmix64(cfg.seed ^ 2ULL)))
    var.row_strings({p.d_label, csv::format_double(a.sigma), p.computed ? csv::format_double(p.variance) : "",
                     p.computed ? "1" : "0"});
  ctx.write("radius_variance.csv", var);

  csv::Writer conv({"D", "sigma", "divergence"});
  Engine conv_rng = substream(cfg.seed, {3});
  for (const auto& p : convergence_curve(cloud, a.sigma, a.convergence_d_list, a.convergence_probes, conv_rng))
    conv.row({p.d_aug, a.sigma, p.value});
  ctx.write("convergence.csv", conv);

  csv::Writer ratio({"l", "r", "N", "D", "empirical", "predicted", "log_empirical", "log_predicted"});
  const double r = std::sqrt(a.ratio_d) * a.sigma;
  Engine ratio_rng = substream(cfg.seed, {4});
  const PosteriorRatio pr = posterior_ratio_check(a.ratio_l, r, a.ratio_n, a.ratio_d, ratio_rng, a.ratio_trials);
  ratio.row({a.ratio_l, r, static_cast<double>(a.ratio_n), a.ratio_d, pr.empirical, pr.predicted,
             std::log(pr.empirical), posterior_ratio_log_predicted(a.ratio_l, r, a.ratio_n, a.ratio_d)});
  ctx.write("posterior_ratio.csv", ratio);
}

inline void run_robustness(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const RobustnessConfig& rc = cfg.robustness;
  const DataCloud cloud = make_dataset(cfg.dataset);
  require(cloud.dim() == cfg.space.n(), "dataset dimension does not match space.n_data");
  DatasetSpec ref_spec = cfg.dataset;
  ref_spec.count = rc.count;
  ref_spec.seed = rc.reference_seed;
  const Matrix reference = make_dataset(ref_spec).points();

  std::vector<SweepModel> models;
  for (const auto& m : rc.models) {
    if (m.backend == "oracle") {
      const SpaceConfig space = space_from_json(nlohmann::json{{"n_data", cloud.dim()}, {"d_aug", m.d_aug}});
      models.push_back({m.label, AnyBackend::wrap(OracleBackend(cloud, space))});
    } else {
      const Checkpoint ck = load_checkpoint(m.checkpoint);
      require(ck.objective == "edm", "robustness: checkpoint " + m.checkpoint + " is not an edm checkpoint");
      models.push_back({m.label, AnyBackend::wrap(DenoiserBackend(denoise_fn(ck.denoiser(true)), ck.space))});
    }
  }
  SweepSettings set;
  set.count = rc.count;
  set.n_proj = rc.n_proj;
  set.seed = cfg.seed;
  set.sw_seed = detail::splitmix64(cfg.seed ^ 0x5151ULL);
  set.noise_scale = cfg.sampler.noise_scale;
  const SweepSchedule sched{cfg.sampler.sigma_max, cfg.sampler.sigma_min, cfg.sampler.rho, cfg.sampler.steps};
  if (!rc.alphas.empty()) ctx.write("robustness.csv", sweep_csv(robustness_sweep(models, rc.alphas, sched, reference, set)));
  if (!rc.steps_list.empty()) ctx.write("nfe.csv", sweep_csv(nfe_sweep(models, rc.steps_list, sched, reference, set)));
}

}  // namespace detail

inline int run(const RunConfig& cfg, std::ostream& log = std::clog);

namespace acceptance {

/// Reads every regular file under dir into (relative path, bytes), sorted.
inline std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream f(e.path(), std::ios::binary);
    out.emplace_back(fs::relative(e.path(), dir).string(),
                     std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// 11. Determinism: train, sample and verify twice with identical configs,
// then once more from the first run's manifest; all artifacts must match.
inline Result determinism(const fs::path& scratch) {
  Result r{"11", "rerun determinism"};
  detail::Stopwatch sw;
  std::ostringstream sink;
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  RunConfig base;
  base.seed = 11;
  base.dataset.count = 256;
  base.train.iterations = 200;
  base.train.batch = 32;
  base.train.hidden = {16, 16};
  base.sampler.count = 64;
  base.sampler.alpha = 0.1;
  base.sampler.trajectory_chains = 2;
  base.verify.criteria = {"3", "5", "10"};

  bool ok = true;
  std::string detail;
  for (Mode mode : {Mode::Train, Mode::Sample, Mode::Verify}) {
    std::vector<std::vector<std::pair<std::string, std::string>>> snaps;
    for (int rep = 0; rep < 3; ++rep) {
      RunConfig c = base;
      if (rep == 2) {
        // Reconstruct from the manifest written by the first run.
        std::ifstream f(scratch / (to_string(mode) + "0") / "manifest.json");
        c = config_from_json(nlohmann::json::parse(f).at("config"));
      }
      c.mode = mode;
      c.out = (scratch / (to_string(mode) + std::to_string(rep))).string();
      c.sampler.checkpoint = (scratch / "train0" / "checkpoint.json").string();
      const int code = run(c, sink);
      ok = ok && code == 0;
      snaps.push_back(snapshot(c.out));
    }
    // The echoed "out" differs between runs by construction; compare the rest.
    for (auto& s : snaps)
      for (auto& [name, bytes] : s)
        if (name == "manifest.json") {
          auto j = nlohmann::json::parse(bytes);
          j["config"].erase("out");
          bytes = j.dump();
        }
    const bool same = snaps[0] == snaps[1] && snaps[0] == snaps[2] && !snaps[0].empty();
    ok = ok && same;
    detail += to_string(mode) + ": " + std::to_string(snaps[0].size()) + " files " + (same ? "identical" : "DIFFER") +
              "; ";
  }
  fs::remove_all(scratch);
  r.seconds = sw.seconds();
  r.pass = ok;
  r.detail = detail + "including a rerun from the manifest";
  return r;
}

struct Criterion {
  std::string id;
  std::function<Result()> fn;
};

inline std::vector<Criterion> all_criteria(bool include_training, const fs::path& scratch) {
  return {{"1", radius_law},
          {"2", gaussian_limit},
          {"3", minimizer_identity},
          {"4", continuity},
          {"5", single_point_exactness},
          {"6a", oracle_quality},
          {"6b", [=] { return trained_quality(include_training); }},
          {"7", robustness_ordering},
          {"8", phase_alignment},
          {"9", gradient_integrity},
          {"10", schedule_and_constants},
          {"11", [=] { return determinism(scratch); }}};
}

inline std::string status_word(const Result& r) { return r.skipped ? "SKIP" : r.pass ? "PASS" : "FAIL"; }

}  // namespace acceptance

namespace detail {

inline void run_verify(RunContext& ctx) {
  const VerifyConfig& v = ctx.cfg.verify;
  auto criteria = acceptance::all_criteria(v.include_training, ctx.out / "determinism-scratch");
  for (const auto& id : v.criteria) {
    const bool known = std::any_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.id == id; });
    require(known, "verify.criteria: unknown criterion '" + id + "'");
  }
  csv::Writer report({"id", "title", "status", "detail"});
  nlohmann::json records = nlohmann::json::array();
  std::vector<std::string> failed;
  for (const auto& c : criteria) {
    if (!v.criteria.empty() && std::find(v.criteria.begin(), v.criteria.end(), c.id) == v.criteria.end()) continue;
    const acceptance::Result r = c.fn();
    const std::string status = acceptance::status_word(r);
    ctx.log << status << " [" << r.id << "] " << r.title << ": " << r.detail << '\n';
    std::string quoted = "\"";
    for (char ch : r.detail) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    quoted += '"';
    report.row_strings({r.id, r.title, status, quoted});
    records.push_back({{"id", r.id}, {"title", r.title}, {"status", status}, {"detail", r.detail}});
    if (!r.pass && !r.skipped) failed.push_back(r.id);
  }
  ctx.write("verify_report.csv", report);
  ctx.write("verify_report.json", nlohmann::json{{"criteria", records}, {"failed", failed}}.dump(2) + "\n");
  if (!failed.empty()) {
    std::string ids;
    for (const auto& id : failed) ids += (ids.empty() ? "" : ", ") + id;
    throw RuntimeError("verification failed: criteria " + ids);
  }
}

}  // namespace detail

/// Executes one run. Returns the process exit code (0 ok, 1 validation,
/// 2 runtime) and leaves manifest.json, plus error.json on failure, in cfg.out.
inline int run(const RunConfig& cfg, std::ostream& log) {
  const fs::path out = cfg.out;
  detail::RunContext ctx{cfg, out, {}, log};
  int code = 0;
  nlohmann::json error;
  try {
    validate(cfg);
    fs::create_directories(out);
    fs::remove(out / "error.json");
    switch (cfg.mode) {
      case Mode::Train: detail::run_train(ctx); break;
      case Mode::Sample: detail::run_sample(ctx); break;
      case Mode::Analyze: detail::run_analyze(ctx); break;
      case Mode::Robustness: detail::run_robustness(ctx); break;
      case Mode::Verify: detail::run_verify(ctx); break;
    }
  } catch (const ValidationError& e) {
    code = 1;
    error = {{"status", "error"}, {"kind", "validation"}, {"exit_code", 1}, {"message", e.what()}};
  } catch (const RuntimeError& e) {
    code = 2;
    error = {{"status", "error"}, {"kind", "runtime"}, {"exit_code", 2}, {"message", e.what()}};
  } catch (const std::exception& e) {
    code = 2;
    error = {{"status", "error"}, {"kind", "runtime"}, {"exit_code", 2}, {"message", e.what()}};
  }
  try {
    fs::create_directories(out);
    if (code != 0) {
      detail::write_json(out / "error.json", error);
      log << "error: " << error["message"].get<std::string>() << '\n';
    }
    detail::write_json(out / "manifest.json", detail::manifest(cfg, ctx.outputs, code == 0 ? "ok" : "error"));
  } catch (const std::exception& e) {
    log << "error: cannot write run records: " << e.what() << '\n';
    if (code == 0) code = 2;
  }
  return code;
}

}  // namespace pfgmpp
