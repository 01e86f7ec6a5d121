// stationfill command-line front end.
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "stationfill/app.hpp"
#include "stationfill/log.hpp"

int main(int argc, char** argv) {
  using namespace stationfill;
  CLI::App app{"Gap filling for hourly station networks"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool verbose = false;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON run configuration");
  auto* out_opt = app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "seed for every random component");
  app.add_flag("-v,--verbose", verbose, "progress messages");
  app.add_flag("-q,--quiet", quiet, "suppress warnings");

  for (const char* name : {"synth", "qc", "build-dataset", "train", "evaluate", "impute"}) app.add_subcommand(name);
  app.get_subcommand("synth")->description("generate a corrupted synthetic seven-station network");
  app.get_subcommand("qc")->description("range, spike and flatline checks; writes cleaned.csv");
  app.get_subcommand("build-dataset")->description("feature table and test periods");
  app.get_subcommand("train")->description("fit the configured regressors");
  app.get_subcommand("evaluate")->description("missing-station benchmark over all 64 masks");
  app.get_subcommand("impute")->description("fill missing target hours with a trained model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  set_log_level(quiet ? LogLevel::Quiet : verbose ? LogLevel::Info : LogLevel::Warn);

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_run_config(config_path);
    else cfg = run_config_from_json(nlohmann::json::object(), ".");
    if (*seed_opt) cfg.apply_seed(seed);
    if (*out_opt) cfg.out_dir = out_dir;
  } catch (const Error& e) {
    std::cerr << "stationfill: " << e.what() << '\n';
    return exit_code_for(e.code());
  }
  return run_command(app.get_subcommands().front()->get_name(), cfg);
}
