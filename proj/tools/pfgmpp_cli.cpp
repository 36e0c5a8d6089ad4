// pfgmpp: command-line runner. See README.md for modes and the config schema.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pfgmpp/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"PFGM++ toy experiments: verify, train, sample, analyze, robustness"};
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  std::string mode;
  bool print_config = false;
  auto* config_opt = app.add_option("--config", config_path, "JSON run configuration");
  auto* seed_opt = app.add_option("--seed", seed, "run seed (overrides the config file)");
  auto* out_opt = app.add_option("--out", out, "output directory (overrides the config file)");
  auto* mode_opt = app.add_option("--mode", mode, "verify | train | sample | analyze | robustness (overrides the config file)");
  app.add_flag("--print-config", print_config, "print the resolved configuration as JSON and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  pfgmpp::Overrides o;
  if (*seed_opt) o.seed = seed;
  if (*out_opt) o.out = out;
  if (*mode_opt) o.mode = mode;
  pfgmpp::RunConfig cfg;
  try {
    cfg = pfgmpp::resolve_config(*config_opt ? std::optional<std::filesystem::path>(config_path) : std::nullopt, o);
  } catch (const pfgmpp::ValidationError& e) {
    // Without a resolved config there is no output directory to record into;
    // fall back to --out when given.
    std::cerr << "error: " << e.what() << '\n';
    if (o.out) {
      std::filesystem::create_directories(*o.out);
      std::ofstream(std::filesystem::path(*o.out) / "error.json")
          << nlohmann::json{{"status", "error"}, {"kind", "validation"}, {"exit_code", 1}, {"message", e.what()}}.dump(2)
          << '\n';
    }
    return 1;
  }
  if (print_config) {
    std::cout << pfgmpp::to_json(cfg).dump(2) << '\n';
    return 0;
  }
  return pfgmpp::run(cfg, std::cerr);
}
