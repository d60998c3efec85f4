#include "satdpd/experiments.hpp"

#include <climits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace satdpd {

std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  if (name == "identify") return ExperimentKind::identify;
  if (name == "convergence") return ExperimentKind::convergence;
  if (name == "backend_loss") return ExperimentKind::backend_loss;
  if (name == "td_sweep") return ExperimentKind::td_sweep;
  throw std::runtime_error("unknown experiment kind: " + name);
}

ExperimentConfig load_experiment_config(const std::string& path,
                                        const ExperimentOverrides& ov) {
  const KeyValueConfig kv = KeyValueConfig::parse_file(path);
  ExperimentConfig cfg;
  cfg.kind = parse_experiment_kind(kv.get_str("kind"));

  if (kv.has("channel_file")) {
    cfg.channel = load_channel_spec(kv.resolve_path(kv.get_str("channel_file")));
  } else {
    cfg.channel = parse_channel_spec(kv);  // inline channel keys / defaults
  }

  cfg.n_block = kv.get_int("n_block", cfg.n_block);
  cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
  cfg.threads = kv.get_int("threads", cfg.threads);
  cfg.out_dir = kv.get_str("out_dir", cfg.out_dir);

  cfg.id_max_order = kv.get_int("identify.max_order", cfg.id_max_order);
  cfg.id_l1 = kv.get_int("identify.l1", cfg.id_l1);
  cfg.id_l2 = kv.get_int("identify.l2", cfg.id_l2);
  cfg.id_n_train = kv.get_int("identify.n_train", cfg.id_n_train);
  cfg.id_ridge = kv.get_real("identify.ridge", cfg.id_ridge);

  if (kv.has("convergence.delta_max_list")) {
    cfg.conv_delta_max = kv.get_real_list("convergence.delta_max_list");
  }
  if (kv.has("convergence.zf_list")) {
    cfg.conv_zf.clear();
    for (const std::string& v : kv.get_str_list("convergence.zf_list")) {
      cfg.conv_zf.push_back(v == "on" || v == "true" || v == "1");
    }
  }
  if (kv.has("convergence.check_modes")) {
    cfg.conv_check_modes.clear();
    for (const std::string& v : kv.get_str_list("convergence.check_modes")) {
      cfg.conv_check_modes.push_back(parse_check_mode(v));
    }
  }
  cfg.conv_max_iters = kv.get_int("convergence.max_iters", cfg.conv_max_iters);
  if (kv.has("convergence.backend")) {
    cfg.conv_backend = parse_backend(kv.get_str("convergence.backend"));
  }

  if (kv.has("backend_loss.ibo_list")) {
    cfg.bl_ibo_list = kv.get_real_list("backend_loss.ibo_list");
  }
  if (kv.has("backend_loss.lc_list")) {
    cfg.bl_lc_list.clear();
    for (double v : kv.get_real_list("backend_loss.lc_list")) {
      cfg.bl_lc_list.push_back(static_cast<int>(v));
    }
  }
  cfg.bl_max_iters = kv.get_int("backend_loss.max_iters", cfg.bl_max_iters);
  cfg.bl_ref_max_iters =
      kv.get_int("backend_loss.ref_max_iters", cfg.bl_ref_max_iters);
  cfg.bl_delta_max = kv.get_real("backend_loss.delta_max", cfg.bl_delta_max);

  if (kv.has("td.ibo_list")) cfg.td_ibo_list = kv.get_real_list("td.ibo_list");
  cfg.td_target_ser = kv.get_real("td.target_ser", cfg.td_target_ser);
  cfg.td_esn0_lo_db = kv.get_real("td.esn0_lo_db", cfg.td_esn0_lo_db);
  cfg.td_esn0_hi_db = kv.get_real("td.esn0_hi_db", cfg.td_esn0_hi_db);
  if (kv.has("td.predistorters")) {
    cfg.td_predistorters = kv.get_str_list("td.predistorters");
  }
  cfg.td_delta_max = kv.get_real("td.delta_max", cfg.td_delta_max);
  cfg.td_max_iters = kv.get_int("td.max_iters", cfg.td_max_iters);
  cfg.td_lc = kv.get_int("td.lc", cfg.td_lc);

  if (ov.n_block > 0) cfg.n_block = ov.n_block;
  if (ov.seed >= 0) cfg.seed = static_cast<std::uint64_t>(ov.seed);
  if (ov.threads > 0) cfg.threads = ov.threads;
  if (!ov.out_dir.empty()) cfg.out_dir = ov.out_dir;
  return cfg;
}

namespace {

std::ofstream open_out(const ExperimentConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/" + name;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write output file: " + path);
  return out;
}

std::shared_ptr<const VolterraKernels> identify_shared(
    const ExperimentConfig& cfg, const ChannelModel& ch) {
  IdentifyResult id = identify(ch, cfg.id_max_order, cfg.id_l1, cfg.id_l2,
                               cfg.id_n_train, cfg.id_ridge, cfg.seed);
  return std::make_shared<VolterraKernels>(std::move(id.kernels));
}

std::shared_ptr<const LutTable> build_lut_auto(
    std::shared_ptr<const VolterraKernels> kernels, const Constellation& c,
    int lc) {
  LutBuildOptions opts;
  const double bytes = std::pow(static_cast<double>(c.points.size()), lc) *
                       lc * 2 * sizeof(cplx);
  opts.lazy = bytes > static_cast<double>(opts.max_bytes);
  opts.frozen_inputs = true;
  return std::make_shared<LutTable>(
      LutTable::build(std::move(kernels), c, lc, opts));
}

}  // namespace

void run_identify_experiment(const ExperimentConfig& cfg) {
  const ChannelModel ch(cfg.channel);
  IdentifyResult id = identify(ch, cfg.id_max_order, cfg.id_l1, cfg.id_l2,
                               cfg.id_n_train, cfg.id_ridge, cfg.seed);
  std::filesystem::create_directories(cfg.out_dir);
  save_kernels(id.kernels, cfg.out_dir + "/kernels.txt");

  std::ofstream rep = open_out(cfg, "identify_report.txt");
  rep << "kernels " << id.kernels.size() << "\n"
      << "residual_db " << csv_num(id.residual_db) << "\n"
      << "cond " << csv_num(id.cond) << "\n"
      << "rows " << id.n_rows << "\n"
      << "cols " << id.n_cols << "\n";
  std::cout << "identify: " << id.kernels.size() << " kernels, residual "
            << csv_num(id.residual_db) << " dB, cond " << csv_num(id.cond)
            << "\n";
}

void run_convergence_experiment(const ExperimentConfig& cfg) {
  const ChannelModel ch(cfg.channel);
  const Constellation c32 = make_apsk32();
  const SymbolBlock s =
      random_symbols(c32, static_cast<std::size_t>(cfg.n_block), cfg.seed);

  bool need_zf = false;
  for (bool z : cfg.conv_zf) need_zf = need_zf || z;
  std::optional<FirFilter> zf;
  if (need_zf) zf = zf_prefilter(ch);

  std::shared_ptr<const VolterraKernels> kernels;
  std::shared_ptr<const LutTable> lut;
  if (cfg.conv_backend == CoeffBackend::reduced_volterra ||
      cfg.conv_backend == CoeffBackend::lut) {
    auto full = identify_shared(cfg, ch);
    kernels = std::make_shared<VolterraKernels>(
        reduce(*full, cfg.id_max_order, cfg.td_lc, 2));
    if (cfg.conv_backend == CoeffBackend::lut) {
      lut = build_lut_auto(
          std::make_shared<VolterraKernels>(
              reduce(*full, cfg.id_max_order, cfg.td_lc, INT_MAX)),
          c32, cfg.td_lc);
    }
  }

  std::ofstream out = open_out(cfg, "convergence.csv");
  out << "delta_max,zf,check_mode,iteration,mse_db\n";

  for (CheckMode mode : cfg.conv_check_modes) {
    for (bool use_zf : cfg.conv_zf) {
      for (double dmax : cfg.conv_delta_max) {
        PredistortConfig pc;
        pc.delta_max = dmax;
        pc.max_iters = cfg.conv_max_iters;
        pc.backend = cfg.conv_backend;
        pc.check_mode = mode;
        pc.min_improvement_db = 0.0;  // run the full iteration budget
        pc.reduced_kernels = kernels;
        pc.lut = lut;
        if (use_zf) pc.zf = zf;
        PredistortResult res = predistort_block(s, ch, pc);
        for (std::size_t it = 0; it < res.trace.mse_db.size(); ++it) {
          out << csv_num(dmax) << "," << (use_zf ? "on" : "off") << ","
              << to_string(mode) << "," << it << ","
              << csv_num(res.trace.mse_db[it]) << "\n";
        }
        std::cout << "convergence: delta_max=" << csv_num(dmax)
                  << " zf=" << (use_zf ? "on" : "off")
                  << " mode=" << to_string(mode) << " final="
                  << csv_num(res.trace.final_mse_db()) << " dB"
                  << (res.trace.reverted ? " (reverted)" : "") << "\n";
      }
    }
  }
}

void run_backend_loss_experiment(const ExperimentConfig& cfg) {
  const Constellation c32 = make_apsk32();
  std::ofstream out = open_out(cfg, "backend_loss.csv");
  out << "ibo_db,backend,lc,mse_db,loss_db\n";

  for (double ibo : cfg.bl_ibo_list) {
    ChannelSpec spec = cfg.channel;
    spec.ibo_db = ibo;
    const ChannelModel ch(spec);
    const SymbolBlock s =
        random_symbols(c32, static_cast<std::size_t>(cfg.n_block), cfg.seed);
    const FirFilter zf = zf_prefilter(ch);
    auto full = identify_shared(cfg, ch);

    PredistortConfig ref_cfg;
    ref_cfg.delta_max = cfg.bl_delta_max;
    ref_cfg.max_iters = cfg.bl_ref_max_iters;
    ref_cfg.backend = CoeffBackend::channel_sim;
    ref_cfg.check_mode = CheckMode::per_step;
    ref_cfg.zf = zf;
    const PredistortResult ref = predistort_block(s, ch, ref_cfg);
    const double ref_mse = mse_db(s, ch.simulate(ref.x));
    out << csv_num(ibo) << ",channel_sim,0," << csv_num(ref_mse) << ",0\n";
    std::cout << "backend_loss: ibo=" << csv_num(ibo)
              <<" ref mse=" << csv_num(ref_mse) << " dB\n";

    for (int lc : cfg.bl_lc_list) {
      auto capped = std::make_shared<VolterraKernels>(
          reduce(*full, cfg.id_max_order, lc, 2));
      auto windowed = std::make_shared<VolterraKernels>(
          reduce(*full, cfg.id_max_order, lc, INT_MAX));
      auto lut = build_lut_auto(windowed, c32, lc);

      for (CoeffBackend backend :
           {CoeffBackend::reduced_volterra, CoeffBackend::lut}) {
        PredistortConfig pc;
        pc.delta_max = cfg.bl_delta_max;
        pc.max_iters = cfg.bl_max_iters;
        pc.backend = backend;
        pc.check_mode = CheckMode::per_iteration;
        pc.zf = zf;
        pc.reduced_kernels = capped;
        pc.lut = lut;
        const PredistortResult res = predistort_block(s, ch, pc);
        const double mse = mse_db(s, ch.simulate(res.x));
        out << csv_num(ibo) << "," << to_string(backend) << "," << lc << ","
            << csv_num(mse) << "," << csv_num(mse - ref_mse) << "\n";
        std::cout << "backend_loss: ibo=" << csv_num(ibo) << " "
                  << to_string(backend) << " lc=" << lc
                  << " loss=" << csv_num(mse - ref_mse) << " dB\n";
      }
    }
  }
}

namespace {

Predistorter make_predistorter(const ExperimentConfig& cfg,
                               const std::string& name) {
  if (name == "none") return nullptr;
  const Constellation c32 = make_apsk32();
  if (name == "channel_sim") {
    return [cfg](const ChannelModel& ch, const SymbolBlock& s) {
      PredistortConfig pc;
      pc.delta_max = cfg.td_delta_max;
      pc.max_iters = cfg.td_max_iters;
      pc.backend = CoeffBackend::channel_sim;
      pc.check_mode = CheckMode::per_step;
      pc.zf = zf_prefilter(ch);
      return predistort_block(s, ch, pc).x;
    };
  }
  if (name == "reduced_volterra" || name == "lut") {
    const bool use_lut = name == "lut";
    return [cfg, c32, use_lut](const ChannelModel& ch, const SymbolBlock& s) {
      auto full = identify_shared(cfg, ch);
      PredistortConfig pc;
      pc.delta_max = cfg.td_delta_max;
      pc.max_iters = cfg.td_max_iters;
      pc.check_mode = CheckMode::per_iteration;
      pc.zf = zf_prefilter(ch);
      if (use_lut) {
        pc.backend = CoeffBackend::lut;
        pc.lut = build_lut_auto(
            std::make_shared<VolterraKernels>(
                reduce(*full, cfg.id_max_order, cfg.td_lc, INT_MAX)),
            c32, cfg.td_lc);
      } else {
        pc.backend = CoeffBackend::reduced_volterra;
        pc.reduced_kernels = std::make_shared<VolterraKernels>(
            reduce(*full, cfg.id_max_order, cfg.td_lc, 2));
      }
      return predistort_block(s, ch, pc).x;
    };
  }
  throw std::runtime_error("unknown predistorter: " + name);
}

}  // namespace

void run_td_sweep_experiment(const ExperimentConfig& cfg) {
  std::ofstream summary = open_out(cfg, "td_summary.txt");

  for (const std::string& name : cfg.td_predistorters) {
    TdSweepOptions opt;
    opt.ibo_list = cfg.td_ibo_list;
    opt.target_ser = cfg.td_target_ser;
    opt.esn0_lo_db = cfg.td_esn0_lo_db;
    opt.esn0_hi_db = cfg.td_esn0_hi_db;
    opt.n_block = cfg.n_block;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;

    const std::vector<TdPoint> pts =
        total_degradation_sweep(cfg.channel, make_predistorter(cfg, name), opt);

    std::ofstream out = open_out(cfg, "td_" + name + ".csv");
    out << "ibo_db,obo_db,omux_loss_db,req_nl_db,req_awgn_db,td_db\n";
    const TdPoint* best = &pts.front();
    for (const TdPoint& p : pts) {
      out << csv_num(p.ibo_db) << "," << csv_num(p.obo_db) << ","
          << csv_num(p.omux_loss_db) << "," << csv_num(p.req_esn0_nl_db)
          << "," << csv_num(p.req_esn0_awgn_db) << "," << csv_num(p.td_db)
          << "\n";
      if (p.td_db < best->td_db) best = &p;
    }
    summary << name << " min_td_db " << csv_num(best->td_db) << " at_obo_db "
            << csv_num(best->obo_db) << "\n";
    std::cout << "td_sweep: " << name << " min TD " << csv_num(best->td_db)
              << " dB at OBO " << csv_num(best->obo_db) << " dB\n";
  }
}

int run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::identify:
      run_identify_experiment(cfg);
      break;
    case ExperimentKind::convergence:
      run_convergence_experiment(cfg);
      break;
    case ExperimentKind::backend_loss:
      run_backend_loss_experiment(cfg);
      break;
    case ExperimentKind::td_sweep:
      run_td_sweep_experiment(cfg);
      break;
  }
  return 0;
}

}  // namespace satdpd
