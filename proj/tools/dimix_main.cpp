// dimix command-line driver.
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dimix/config.hpp"
#include "dimix/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Two time-scale decentralized gradient descent with lossy sharing"};
  app.set_version_flag("--version", std::string(DIMIX_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  dimix::CliOptions opt;
  std::uint64_t seed = 0;
  std::string out_dir;
  double assume_q0 = 0.0;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* c = cmd->add_option("--config", config_path, "experiment config file");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    cmd->add_option("--jobs", opt.jobs, "concurrent runs")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--out", out_dir, "output directory (default: config, then $DIMIX_OUT)");
    cmd->add_flag("--plots", opt.plots, "write loss.svg and deviation.svg");
  };
  auto* run = app.add_subcommand("run", "Monte Carlo runs; writes CSVs, manifest and plots");
  auto* validate = app.add_subcommand("validate", "check the mixing schedule assumptions");
  auto* theory = app.add_subcommand("theory", "theorem constants and bound against traces");
  auto* lemmas = app.add_subcommand("lemmas", "numerical checks of the auxiliary lemmas");
  auto* sweep = app.add_subcommand("sweep", "final-iterate rate over sweep.T_grid");
  for (auto* cmd : {run, validate, theory, sweep}) add_common(cmd, true);
  add_common(lemmas, false);
  theory->add_option("--assume-q0", assume_q0, "use this Q(T0) instead of the traces");

  CLI11_PARSE(app, argc, argv);

  for (auto* cmd : {run, validate, theory, lemmas, sweep}) {
    if (cmd->count("--seed")) opt.seed = seed;
    if (cmd->count("--out")) opt.out = out_dir;
  }
  if (theory->count("--assume-q0")) opt.assume_q0 = assume_q0;

  try {
    if (*lemmas) return dimix::cmd_lemmas(opt, std::cout);
    const dimix::ExperimentConfig cfg = dimix::load_config(config_path);
    if (*run) return dimix::cmd_run(cfg, opt, std::cout);
    if (*validate) return dimix::cmd_validate(cfg, opt, std::cout);
    if (*theory) return dimix::cmd_theory(cfg, opt, std::cout);
    if (*sweep) return dimix::cmd_sweep(cfg, opt, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "dimix: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
