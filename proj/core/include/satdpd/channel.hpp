#pragma once

#include <optional>
#include <string>

#include "satdpd/config.hpp"
#include "satdpd/dsp.hpp"

namespace satdpd {

/// Saleh TWT amplitude/phase model. am() peaks at r = 1/sqrt(beta_a);
/// pm() is in radians.
struct SalehParams {
  double alpha_a = 2.1587;
  double beta_a = 1.1517;
  double alpha_p = 4.0033;
  double beta_p = 9.1040;
};

/// Memoryless amplifier model: r e^{j phi} -> am(r) e^{j(phi + pm(r))}.
/// Either an analytic Saleh characteristic or sampled AM-AM / AM-PM tables
/// with linear interpolation (inputs beyond the table range clamp to the
/// last entry).
class HpaModel {
 public:
  static HpaModel saleh(const SalehParams& p = SalehParams{});
  /// Exact linear device (am(r) = r, pm = 0), useful as a transparent stand-in.
  static HpaModel linear();
  /// Tables must share the amplitude grid start at 0 with am(0) = 0 and be
  /// monotone non-decreasing up to the AM-AM peak. Phase in radians.
  static HpaModel from_tables(std::vector<double> amp_in,
                              std::vector<double> amp_out,
                              std::vector<double> phase_rad);
  /// Two-column text files: AM file rows "amp_in amp_out", PM file rows
  /// "amp_in phase_deg".
  static HpaModel load_tables(const std::string& am_path,
                              const std::string& pm_path);

  double am(double r) const;
  double pm(double r) const;
  cplx apply(cplx v) const;

  /// Input amplitude at which am() peaks.
  double input_saturation() const { return in_sat_; }
  /// am(input_saturation()).
  double output_saturation() const { return out_sat_; }

  bool is_table() const { return kind_ == Kind::table; }

 private:
  enum class Kind { saleh, linear, table };
  Kind kind_ = Kind::saleh;
  SalehParams saleh_{};
  std::vector<double> tab_r_, tab_a_, tab_p_;
  double in_sat_ = 1.0, out_sat_ = 1.0;

  void calibrate_saturation();
};

/// Drive gain that realizes ibo_db of input back-off for signal x: the gain
/// g such that mean |g x|^2 sits ibo_db below the HPA input saturation
/// power. Applies the gain, then the HPA, sample by sample.
ComplexSignal hpa_apply(const ComplexSignal& x, const HpaModel& hpa,
                        double ibo_db);

/// Chebyshev-magnitude bandpass stand-in for a multiplexer filter, realized
/// as a zero-phase FIR (optional parabolic group-delay shaping).
struct MuxFilterSpec {
  bool enable = true;
  int order = 4;
  double ripple_db = 0.25;
  double bw_hz = 36e6;  // two-sided 3-dB bandwidth
  int ntaps = 257;
  double group_delay_par_ns = 0.0;  // parabolic delay deviation at band edge
};

struct ChannelSpec {
  double symbol_rate_hz = 36e6;
  int osf = 8;
  double rolloff = 0.1;
  int srrc_span = 32;
  double ibo_db = 3.0;
  MuxFilterSpec imux{};
  MuxFilterSpec omux{};
  HpaModel hpa = HpaModel::saleh();
  double memory_threshold_dbc = -40.0;
  int l1_override = -1;  // < 0 means measure
  int l2_override = -1;
};

/// Read a ChannelSpec from flat key-value text (see docs/README for keys).
ChannelSpec parse_channel_spec(const KeyValueConfig& cfg);
ChannelSpec load_channel_spec(const std::string& path);

FirFilter design_mux_filter(const MuxFilterSpec& spec, double fs);

/// Oversampled simulation of the end-to-end chain:
/// upsample -> SRRC -> IMUX -> drive gain -> HPA -> OMUX -> SRRC -> sample.
///
/// Construction designs the filters, calibrates a fixed drive gain for the
/// nominal input back-off and a fixed complex output gain (least-squares fit
/// of output to input symbols on a reference block, i.e. receiver AGC and
/// bulk phase derotation), then measures the effective symbol-rate memory
/// (l1 anti-causal, l2 causal) from the perturbation response at the
/// configured dBc threshold. All gains are frozen afterwards, so simulate()
/// is a deterministic length-preserving map; block-edge outputs see partial
/// filter support and are treated as don't-care by the rest of the system.
class ChannelModel {
 public:
  explicit ChannelModel(const ChannelSpec& spec);

  SymbolBlock simulate(const SymbolBlock& x) const;

  const ChannelSpec& spec() const { return spec_; }
  int osf() const { return spec_.osf; }
  int l1() const { return l1_; }
  int l2() const { return l2_; }
  int lc() const { return l1_ + l2_ + 1; }

  double drive_gain() const { return drive_gain_; }
  cplx output_gain() const { return output_gain_; }

  /// Combined transmit-side taps (SRRC cascaded with IMUX).
  const FirFilter& front() const { return front_; }
  /// Combined receive-side taps (OMUX cascaded with SRRC).
  const FirFilter& back() const { return back_; }
  /// OMUX alone, for stage-power measurements.
  const FirFilter& omux() const { return omux_; }
  const HpaModel& hpa() const { return spec_.hpa; }

 private:
  ChannelSpec spec_;
  FirFilter front_, back_, omux_;
  double drive_gain_ = 1.0;
  cplx output_gain_ = 1.0;
  int l1_ = 0, l2_ = 0;

  void measure_memory();
};

/// Adds circular complex white Gaussian noise with per-symbol SNR esn0_db
/// measured against the mean energy of y. A non-finite positive esn0_db
/// (e.g. +infinity) is the noiseless sentinel. Reproducible by seed.
SymbolBlock add_awgn(const SymbolBlock& y, double esn0_db, std::uint64_t seed);

struct OperatingPoint {
  double ibo_db = 0.0;
  double obo_db = 0.0;
  double omux_loss_db = 0.0;
};

/// Measures the realized operating point for a given input block:
/// OBO = saturation output power over mean HPA output power;
/// omux_loss = mean power before over after the OMUX.
OperatingPoint measure_operating_point(const ChannelModel& ch,
                                       const SymbolBlock& x);

}  // namespace satdpd
