#pragma once

#include <string>

#include "satdpd/metrics.hpp"

namespace satdpd {

enum class ExperimentKind { identify, convergence, backend_loss, td_sweep };

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::convergence;
  ChannelSpec channel;
  int n_block = 2048;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = ".";

  // identify
  int id_max_order = 3;
  int id_l1 = 3;
  int id_l2 = 3;
  int id_n_train = 8000;
  double id_ridge = 1e-8;

  // convergence
  std::vector<double> conv_delta_max = {0.05, 0.1, 0.2};
  std::vector<bool> conv_zf = {true, false};
  std::vector<CheckMode> conv_check_modes = {CheckMode::per_step};
  int conv_max_iters = 10;
  CoeffBackend conv_backend = CoeffBackend::channel_sim;

  // backend_loss
  std::vector<double> bl_ibo_list = {3.0, 4.0, 5.0};
  std::vector<int> bl_lc_list = {3, 5};
  int bl_max_iters = 10;
  int bl_ref_max_iters = 15;
  double bl_delta_max = 0.1;

  // td_sweep
  std::vector<double> td_ibo_list = {1, 2, 3, 4, 5, 6, 7, 8};
  double td_target_ser = 1e-2;
  double td_esn0_lo_db = 5.0;
  double td_esn0_hi_db = 40.0;
  std::vector<std::string> td_predistorters = {"none", "reduced_volterra"};
  double td_delta_max = 0.1;
  int td_max_iters = 10;
  int td_lc = 3;
};

ExperimentKind parse_experiment_kind(const std::string& name);

struct ExperimentOverrides {
  int n_block = -1;  // < 0 keeps the config value
  long long seed = -1;
  int threads = -1;
  std::string out_dir;  // empty keeps the config value
};

ExperimentConfig load_experiment_config(const std::string& path,
                                        const ExperimentOverrides& ov = {});

/// Dispatch by kind; writes CSV outputs under cfg.out_dir and a human
/// summary to stdout. Returns 0 on success.
int run_experiment(const ExperimentConfig& cfg);

void run_identify_experiment(const ExperimentConfig& cfg);
void run_convergence_experiment(const ExperimentConfig& cfg);
void run_backend_loss_experiment(const ExperimentConfig& cfg);
void run_td_sweep_experiment(const ExperimentConfig& cfg);

/// Fixed 6-significant-digit formatting used by every CSV writer.
std::string csv_num(double v);

}  // namespace satdpd
