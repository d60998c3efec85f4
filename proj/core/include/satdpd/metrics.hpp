#pragma once

#include <functional>

#include "satdpd/channel.hpp"
#include "satdpd/predistort.hpp"

namespace satdpd {

/// 10 log10(mean |y - s|^2 / mean |s|^2), floored at -200 dB.
double mse_db(const SymbolBlock& s, const SymbolBlock& y);

struct ErrorRates {
  double ser = 0.0;
  double ber = 0.0;
  long symbol_errors = 0;
  long bit_errors = 0;
  long n_symbols = 0;
};

/// Memoryless nearest-point detection against the reference symbols. BER
/// uses the constellation's bit labels.
ErrorRates detect_ser_ber(const SymbolBlock& y, const SymbolBlock& s,
                          const Constellation& c);

struct RequiredEsn0Options {
  double target_err = 1e-2;
  double lo_db = 0.0;
  double hi_db = 30.0;
  double tol_db = 0.05;
};

/// Bisection for the Es/N0 that reaches target_err, assuming err_of_esn0 is
/// non-increasing. Throws std::runtime_error when the bracket does not
/// straddle the target.
double required_esn0(const std::function<double(double)>& err_of_esn0,
                     const RequiredEsn0Options& opt);

/// Monte-Carlo symbol error rate of nearest-point detection on y_clean plus
/// AWGN at esn0_db. Draws fresh noise (seed, seed+1, ...) until at least
/// min_error_events errors or max_trials noise realizations were counted.
/// edge_margin symbols at both block ends are excluded.
double measure_awgn_ser(const SymbolBlock& y_clean, const SymbolBlock& s,
                        const Constellation& c, double esn0_db,
                        long min_error_events, int max_trials,
                        std::uint64_t seed, int edge_margin);

struct TdPoint {
  double ibo_db = 0.0;
  double obo_db = 0.0;
  double omux_loss_db = 0.0;
  double req_esn0_nl_db = 0.0;
  double req_esn0_awgn_db = 0.0;
  double td_db = 0.0;
};

inline double total_degradation_db(const TdPoint& p) {
  return p.obo_db + p.omux_loss_db + p.req_esn0_nl_db - p.req_esn0_awgn_db;
}

/// Maps a channel to the transmitted block for the data block s (identity
/// for no pre-distortion).
using Predistorter =
    std::function<SymbolBlock(const ChannelModel&, const SymbolBlock& s)>;

struct TdSweepOptions {
  std::vector<double> ibo_list;
  double target_ser = 1e-2;
  double esn0_lo_db = 5.0;
  double esn0_hi_db = 40.0;
  int n_block = 2048;
  long min_error_events = 100;
  int max_noise_trials = 64;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Per configured back-off: rebuilds the channel, transmits the
/// (pre-distorted) block, measures the operating point and the Es/N0
/// required for target_ser on the noiseless received block plus AWGN, and
/// compares against the matched AWGN-only baseline.
std::vector<TdPoint> total_degradation_sweep(const ChannelSpec& tmpl,
                                             const Predistorter& pd,
                                             const TdSweepOptions& opt);

}  // namespace satdpd
