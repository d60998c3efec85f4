#include "satdpd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>

namespace satdpd {

double mse_db(const SymbolBlock& s, const SymbolBlock& y) {
  if (s.size() != y.size()) {
    throw std::invalid_argument("mse_db: length mismatch");
  }
  if (s.empty()) throw std::invalid_argument("mse_db: empty blocks");
  double e = 0.0, p = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    e += std::norm(y[i] - s[i]);
    p += std::norm(s[i]);
  }
  if (!(p > 0.0)) throw std::invalid_argument("mse_db: zero-power reference");
  double r = e / p;
  if (!(r > 1e-20)) return -200.0;
  return std::max(db10(r), -200.0);
}

ErrorRates detect_ser_ber(const SymbolBlock& y, const SymbolBlock& s,
                          const Constellation& c) {
  if (y.size() != s.size()) {
    throw std::invalid_argument("detect_ser_ber: length mismatch");
  }
  ErrorRates r;
  r.n_symbols = static_cast<long>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t det = nearest_point(y[i], c);
    const std::size_t ref = nearest_point(s[i], c);
    if (det != ref) {
      ++r.symbol_errors;
      r.bit_errors += __builtin_popcount(c.bits[det] ^ c.bits[ref]);
    }
  }
  r.ser = static_cast<double>(r.symbol_errors) / r.n_symbols;
  r.ber = static_cast<double>(r.bit_errors) /
          (static_cast<double>(r.n_symbols) * c.bits_per_symbol);
  return r;
}

double required_esn0(const std::function<double(double)>& err_of_esn0,
                     const RequiredEsn0Options& opt) {
  double lo = opt.lo_db, hi = opt.hi_db;
  double err_lo = err_of_esn0(lo);
  double err_hi = err_of_esn0(hi);
  if (err_lo < opt.target_err || err_hi > opt.target_err) {
    throw std::runtime_error(
        "required_esn0: target error rate not bracketed by the search range");
  }
  while (hi - lo > opt.tol_db) {
    const double mid = 0.5 * (lo + hi);
    if (err_of_esn0(mid) > opt.target_err) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double measure_awgn_ser(const SymbolBlock& y_clean, const SymbolBlock& s,
                        const Constellation& c, double esn0_db,
                        long min_error_events, int max_trials,
                        std::uint64_t seed, int edge_margin) {
  const long n = static_cast<long>(y_clean.size());
  if (n <= 2 * edge_margin) {
    throw std::invalid_argument("measure_awgn_ser: block shorter than margins");
  }
  SymbolBlock yc(y_clean.begin() + edge_margin, y_clean.end() - edge_margin);
  SymbolBlock sc(s.begin() + edge_margin, s.end() - edge_margin);
  long errors = 0;
  long symbols = 0;
  for (int trial = 0; trial < max_trials; ++trial) {
    SymbolBlock yn = add_awgn(yc, esn0_db, seed + static_cast<std::uint64_t>(trial));
    ErrorRates r = detect_ser_ber(yn, sc, c);
    errors += r.symbol_errors;
    symbols += r.n_symbols;
    if (errors >= min_error_events && trial >= 2) break;
  }
  return static_cast<double>(errors) / static_cast<double>(symbols);
}

namespace {

TdPoint td_point_at(const ChannelSpec& tmpl, double ibo_db,
                    const Predistorter& pd, const TdSweepOptions& opt,
                    const Constellation& c32, double req_awgn) {
  ChannelSpec spec = tmpl;
  spec.ibo_db = ibo_db;
  ChannelModel ch(spec);

  const SymbolBlock s =
      random_symbols(c32, static_cast<std::size_t>(opt.n_block), opt.seed);
  const SymbolBlock x = pd ? pd(ch, s) : s;
  const SymbolBlock y_clean = ch.simulate(x);
  const OperatingPoint op = measure_operating_point(ch, x);

  const int margin = ch.lc() + 4;
  auto err_nl = [&](double esn0) {
    return measure_awgn_ser(y_clean, s, c32, esn0, opt.min_error_events,
                            opt.max_noise_trials, opt.seed + 101, margin);
  };
  RequiredEsn0Options ropt;
  ropt.target_err = opt.target_ser;
  ropt.lo_db = opt.esn0_lo_db;
  ropt.hi_db = opt.esn0_hi_db;

  TdPoint p;
  p.ibo_db = ibo_db;
  p.obo_db = op.obo_db;
  p.omux_loss_db = op.omux_loss_db;
  p.req_esn0_nl_db = required_esn0(err_nl, ropt);
  p.req_esn0_awgn_db = req_awgn;
  p.td_db = total_degradation_db(p);
  return p;
}

}  // namespace

std::vector<TdPoint> total_degradation_sweep(const ChannelSpec& tmpl,
                                             const Predistorter& pd,
                                             const TdSweepOptions& opt) {
  if (opt.ibo_list.empty()) {
    throw std::invalid_argument("td sweep: empty back-off list");
  }
  const Constellation c32 = make_apsk32();

  // AWGN baseline: the ideal linear channel, shared by every sweep point.
  const SymbolBlock s_ref =
      random_symbols(c32, static_cast<std::size_t>(opt.n_block), opt.seed);
  auto err_awgn = [&](double esn0) {
    return measure_awgn_ser(s_ref, s_ref, c32, esn0, opt.min_error_events,
                            opt.max_noise_trials, opt.seed + 51, 0);
  };
  RequiredEsn0Options ropt;
  ropt.target_err = opt.target_ser;
  ropt.lo_db = opt.esn0_lo_db;
  ropt.hi_db = opt.esn0_hi_db;
  const double req_awgn = required_esn0(err_awgn, ropt);

  std::vector<TdPoint> points(opt.ibo_list.size());
  if (opt.threads > 1) {
    std::vector<std::future<TdPoint>> futs;
    futs.reserve(opt.ibo_list.size());
    for (double ibo : opt.ibo_list) {
      futs.push_back(std::async(std::launch::async, [&, ibo] {
        return td_point_at(tmpl, ibo, pd, opt, c32, req_awgn);
      }));
    }
    for (std::size_t i = 0; i < futs.size(); ++i) points[i] = futs[i].get();
  } else {
    for (std::size_t i = 0; i < opt.ibo_list.size(); ++i) {
      points[i] = td_point_at(tmpl, opt.ibo_list[i], pd, opt, c32, req_awgn);
    }
  }
  return points;
}

}  // namespace satdpd
