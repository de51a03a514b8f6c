// Command-line front end: four experiment commands sharing one JSON config
// format.  Every artifact lands in --out; the run manifest is echoed on
// stdout so scripts can pick up the file list without globbing.

#include <cstdio>
#include <cstdint>
#include <string>

#include <CLI11.hpp>

#include "islab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"inverse-shadowing experiment runner"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;

  CLI::App* orbit = app.add_subcommand(
      "orbit", "sample orbit frames and check the transport identities");
  CLI::App* defect = app.add_subcommand(
      "defect", "measure the method defect across the d ladder");
  CLI::App* probe = app.add_subcommand(
      "probe", "estimate bounded-solvability growth across window sizes");
  CLI::App* replay = app.add_subcommand(
      "replay", "search for shadows and replay the deviation recursion");
  for (CLI::App* cmd : {orbit, defect, probe, replay}) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")
        ->required();
    cmd->add_option("--out", out_dir, "output directory")->required();
    cmd->add_option("--seed", seed, "override the config seed");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    islab::ExperimentConfig cfg = islab::load_experiment_config(config_path);
    CLI::App* active = app.get_subcommands().front();
    if (active->count("--seed")) {
      cfg.seed = seed;
      cfg.has_seed = true;
    }
    nlohmann::json manifest;
    if (active == orbit)
      manifest = islab::run_orbit(cfg, out_dir);
    else if (active == defect)
      manifest = islab::run_defect(cfg, out_dir);
    else if (active == probe)
      manifest = islab::run_probe(cfg, out_dir);
    else
      manifest = islab::run_replay(cfg, out_dir);
    std::printf("%s\n", manifest.dump(2).c_str());
    return 0;
  } catch (const islab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
