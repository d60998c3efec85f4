// Experiment runner for the satellite-channel pre-distortion toolkit.
//
// Subcommands mirror the experiment kinds: identify a symbol-rate kernel
// model, trace pre-distortion convergence, compare coefficient back-ends,
// and sweep total degradation against back-off. Each reads a flat key-value
// config and writes CSV results.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>

#include "satdpd/experiments.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out_dir;
  long long seed = -1;
  int n_override = -1;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "output directory override");
  cmd->add_option("--seed", args.seed, "seed override");
  cmd->add_option("--n-override", args.n_override, "block size override");
  cmd->add_option("--threads", args.threads, "worker thread override");
}

int run(const CommonArgs& args, satdpd::ExperimentKind kind) {
  satdpd::ExperimentOverrides ov;
  ov.n_block = args.n_override;
  ov.seed = args.seed;
  ov.threads = args.threads;
  ov.out_dir = args.out_dir;
  satdpd::ExperimentConfig cfg = satdpd::load_experiment_config(args.config, ov);
  if (cfg.kind != kind) {
    throw std::runtime_error("config kind does not match the subcommand");
  }
  return satdpd::run_experiment(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"satellite channel pre-distortion experiments"};
  app.require_subcommand(1);

  CommonArgs identify_args, convergence_args, backend_args, td_args;
  CLI::App* c_identify =
      app.add_subcommand("identify", "fit a symbol-rate kernel model");
  add_common(c_identify, identify_args);
  CLI::App* c_convergence =
      app.add_subcommand("convergence", "per-iteration MSE traces");
  add_common(c_convergence, convergence_args);
  CLI::App* c_backend =
      app.add_subcommand("backend-loss", "coefficient back-end comparison");
  add_common(c_backend, backend_args);
  CLI::App* c_td =
      app.add_subcommand("td-sweep", "total degradation versus back-off");
  add_common(c_td, td_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_identify->parsed()) {
      return run(identify_args, satdpd::ExperimentKind::identify);
    }
    if (c_convergence->parsed()) {
      return run(convergence_args, satdpd::ExperimentKind::convergence);
    }
    if (c_backend->parsed()) {
      return run(backend_args, satdpd::ExperimentKind::backend_loss);
    }
    if (c_td->parsed()) {
      return run(td_args, satdpd::ExperimentKind::td_sweep);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
