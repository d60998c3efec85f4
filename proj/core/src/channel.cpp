#include "satdpd/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace satdpd {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kCalibSeed = 0x5eedc0de;

double chebyshev_t(int n, double x) {
  // |x| can exceed 1; use the hyperbolic continuation there.
  if (std::abs(x) <= 1.0) return std::cos(n * std::acos(x));
  double a = std::abs(x);
  double t = std::cosh(n * std::acosh(a));
  return (x < 0.0 && n % 2 == 1) ? -t : t;
}

std::vector<std::pair<double, double>> read_two_column(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open table file: " + path);
  std::vector<std::pair<double, double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    double a, b;
    if (ls >> a >> b) rows.emplace_back(a, b);
  }
  if (rows.empty()) throw std::runtime_error("empty table file: " + path);
  return rows;
}

double interp_clamped(const std::vector<double>& xs,
                      const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t i = static_cast<std::size_t>(it - xs.begin());
  double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
  return ys[i - 1] + t * (ys[i] - ys[i - 1]);
}

}  // namespace

HpaModel HpaModel::saleh(const SalehParams& p) {
  HpaModel m;
  m.kind_ = Kind::saleh;
  m.saleh_ = p;
  m.calibrate_saturation();
  return m;
}

HpaModel HpaModel::linear() {
  HpaModel m;
  m.kind_ = Kind::linear;
  m.in_sat_ = 1.0;
  m.out_sat_ = 1.0;
  return m;
}

HpaModel HpaModel::from_tables(std::vector<double> amp_in,
                               std::vector<double> amp_out,
                               std::vector<double> phase_rad) {
  if (amp_in.size() < 2 || amp_in.size() != amp_out.size() ||
      amp_in.size() != phase_rad.size()) {
    throw std::invalid_argument("hpa tables: need >= 2 rows, equal lengths");
  }
  if (!std::is_sorted(amp_in.begin(), amp_in.end())) {
    throw std::invalid_argument("hpa tables: amp_in must be ascending");
  }
  if (amp_in.front() != 0.0 || amp_out.front() != 0.0) {
    throw std::invalid_argument("hpa tables: must start at am(0) = 0");
  }
  std::size_t peak = static_cast<std::size_t>(
      std::max_element(amp_out.begin(), amp_out.end()) - amp_out.begin());
  for (std::size_t i = 1; i <= peak; ++i) {
    if (amp_out[i] + 1e-12 < amp_out[i - 1]) {
      throw std::invalid_argument(
          "hpa tables: AM-AM must be non-decreasing up to saturation");
    }
  }
  HpaModel m;
  m.kind_ = Kind::table;
  m.tab_r_ = std::move(amp_in);
  m.tab_a_ = std::move(amp_out);
  m.tab_p_ = std::move(phase_rad);
  m.in_sat_ = m.tab_r_[peak];
  m.out_sat_ = m.tab_a_[peak];
  return m;
}

HpaModel HpaModel::load_tables(const std::string& am_path,
                               const std::string& pm_path) {
  auto am = read_two_column(am_path);
  auto pm = read_two_column(pm_path);
  std::vector<double> r, a, p;
  for (auto& [x, y] : am) {
    r.push_back(x);
    a.push_back(y);
  }
  // Phase grid may differ from the AM grid; resample onto the AM grid.
  std::vector<double> pr, pv;
  for (auto& [x, y] : pm) {
    pr.push_back(x);
    pv.push_back(y * kPi / 180.0);
  }
  for (double x : r) p.push_back(interp_clamped(pr, pv, x));
  return from_tables(std::move(r), std::move(a), std::move(p));
}

void HpaModel::calibrate_saturation() {
  // Saleh AM-AM alpha r / (1 + beta r^2) peaks at r = 1/sqrt(beta).
  in_sat_ = 1.0 / std::sqrt(saleh_.beta_a);
  out_sat_ = am(in_sat_);
}

double HpaModel::am(double r) const {
  switch (kind_) {
    case Kind::saleh:
      return saleh_.alpha_a * r / (1.0 + saleh_.beta_a * r * r);
    case Kind::linear:
      return r;
    case Kind::table:
      return interp_clamped(tab_r_, tab_a_, r);
  }
  return 0.0;
}

double HpaModel::pm(double r) const {
  switch (kind_) {
    case Kind::saleh:
      return saleh_.alpha_p * r * r / (1.0 + saleh_.beta_p * r * r);
    case Kind::linear:
      return 0.0;
    case Kind::table:
      return interp_clamped(tab_r_, tab_p_, r);
  }
  return 0.0;
}

cplx HpaModel::apply(cplx v) const {
  double r = std::abs(v);
  if (r == 0.0) return cplx(0.0, 0.0);
  double a = am(r);
  double phi = pm(r);
  cplx unit = v / r;
  return a * unit * std::polar(1.0, phi);
}

ComplexSignal hpa_apply(const ComplexSignal& x, const HpaModel& hpa,
                        double ibo_db) {
  if (!std::isfinite(ibo_db)) {
    throw std::invalid_argument("hpa_apply: ibo_db must be finite");
  }
  double p = mean_power(x.samples);
  if (p <= 0.0) {
    // All-zero input maps to all-zero output at any back-off.
    return x;
  }
  double p_target = hpa.input_saturation() * hpa.input_saturation() *
                    undb10(-ibo_db);
  double g = std::sqrt(p_target / p);
  ComplexSignal out;
  out.rate = x.rate;
  out.samples.resize(x.samples.size());
  for (std::size_t i = 0; i < x.samples.size(); ++i) {
    out.samples[i] = hpa.apply(g * x.samples[i]);
  }
  return out;
}

FirFilter design_mux_filter(const MuxFilterSpec& spec, double fs) {
  if (!spec.enable) return delta_filter();
  if (spec.order < 1 || spec.bw_hz <= 0 || spec.ntaps < 3 ||
      spec.ntaps % 2 == 0) {
    throw std::invalid_argument("mux filter: bad order/bandwidth/ntaps");
  }
  const double fc = spec.bw_hz / 2.0;  // baseband one-sided cutoff
  const double ripple = std::max(spec.ripple_db, 1e-6);
  const double eps = std::sqrt(undb10(ripple) - 1.0);
  const int order = spec.order;
  const double tau_par = spec.group_delay_par_ns * 1e-9;

  auto h_of_f = [=](double f) -> cplx {
    double t = chebyshev_t(order, f / fc);
    double mag = 1.0 / std::sqrt(1.0 + eps * eps * t * t);
    if (tau_par == 0.0) return cplx(mag, 0.0);
    // Parabolic group delay tau(f) = tau_par (f/fc)^2 integrates to a cubic
    // phase.
    double phase = -2.0 * kPi * tau_par * f * f * f / (3.0 * fc * fc);
    return mag * std::polar(1.0, phase);
  };

  int nfft = 1;
  while (nfft < 8 * spec.ntaps) nfft <<= 1;
  return design_from_frequency_response(h_of_f, fs, spec.ntaps, nfft);
}

ChannelSpec parse_channel_spec(const KeyValueConfig& cfg) {
  ChannelSpec s;
  s.symbol_rate_hz = cfg.get_real("symbol_rate_hz", s.symbol_rate_hz);
  s.osf = cfg.get_int("osf", s.osf);
  s.rolloff = cfg.get_real("rolloff", s.rolloff);
  s.srrc_span = cfg.get_int("srrc_span", s.srrc_span);
  s.ibo_db = cfg.get_real("ibo_db", s.ibo_db);

  auto fill_mux = [&](const std::string& prefix, MuxFilterSpec& m) {
    m.enable = cfg.get_bool(prefix + ".enable", m.enable);
    m.order = cfg.get_int(prefix + ".order", m.order);
    m.ripple_db = cfg.get_real(prefix + ".ripple_db", m.ripple_db);
    m.bw_hz = cfg.get_real(prefix + ".bw_hz", m.bw_hz);
    m.ntaps = cfg.get_int(prefix + ".ntaps", m.ntaps);
    m.group_delay_par_ns =
        cfg.get_real(prefix + ".group_delay_par_ns", m.group_delay_par_ns);
  };
  fill_mux("imux", s.imux);
  fill_mux("omux", s.omux);

  std::string kind = cfg.get_str("hpa.kind", "saleh");
  if (kind == "saleh") {
    SalehParams p;
    p.alpha_a = cfg.get_real("hpa.alpha_a", p.alpha_a);
    p.beta_a = cfg.get_real("hpa.beta_a", p.beta_a);
    p.alpha_p = cfg.get_real("hpa.alpha_p", p.alpha_p);
    p.beta_p = cfg.get_real("hpa.beta_p", p.beta_p);
    s.hpa = HpaModel::saleh(p);
  } else if (kind == "linear") {
    s.hpa = HpaModel::linear();
  } else if (kind == "table") {
    s.hpa = HpaModel::load_tables(cfg.resolve_path(cfg.get_str("hpa.am_file")),
                                  cfg.resolve_path(cfg.get_str("hpa.pm_file")));
  } else {
    throw std::runtime_error("hpa.kind must be saleh, linear or table");
  }

  s.memory_threshold_dbc =
      cfg.get_real("memory.threshold_dbc", s.memory_threshold_dbc);
  s.l1_override = cfg.get_int("memory.l1", s.l1_override);
  s.l2_override = cfg.get_int("memory.l2", s.l2_override);
  if (s.osf < 2) throw std::invalid_argument("channel: osf must be >= 2");
  return s;
}

ChannelSpec load_channel_spec(const std::string& path) {
  return parse_channel_spec(KeyValueConfig::parse_file(path));
}

ChannelModel::ChannelModel(const ChannelSpec& spec) : spec_(spec) {
  if (spec_.osf < 2) throw std::invalid_argument("channel: osf must be >= 2");
  const double fs = spec_.symbol_rate_hz * spec_.osf;

  FirFilter srrc = design_srrc(spec_.rolloff, spec_.srrc_span, spec_.osf);
  FirFilter imux = design_mux_filter(spec_.imux, fs);
  omux_ = design_mux_filter(spec_.omux, fs);
  front_ = cascade(srrc, imux);
  back_ = cascade(omux_, srrc);

  // Drive-gain calibration on a reference random block, so simulate() is a
  // fixed deterministic map independent of the block it is applied to.
  const Constellation c32 = make_apsk32();
  const SymbolBlock cal = random_symbols(c32, 4096, kCalibSeed);
  ComplexSignal u = fir_filter(upsample_insert_zeros(cal, spec_.osf), front_);
  double p0 = mean_power(u.samples);
  double in_sat = spec_.hpa.input_saturation();
  drive_gain_ = std::sqrt(in_sat * in_sat * undb10(-spec_.ibo_db) / p0);

  // Output gain: least-squares scalar fit of received symbols to the sent
  // block (receiver AGC plus bulk phase derotation at the operating point).
  for (cplx& v : u.samples) v = spec_.hpa.apply(drive_gain_ * v);
  ComplexSignal w = fir_filter(u, back_);
  SymbolBlock y0 = downsample_at_symbol_instants(w, spec_.osf, 0);
  const int margin =
      (front_.delay + back_.delay) / spec_.osf + 2;
  cplx num = 0.0;
  double den = 0.0;
  for (std::size_t n = margin; n + margin < y0.size(); ++n) {
    num += std::conj(y0[n]) * cal[n];
    den += std::norm(y0[n]);
  }
  output_gain_ = num / den;

  if (spec_.l1_override >= 0 && spec_.l2_override >= 0) {
    l1_ = spec_.l1_override;
    l2_ = spec_.l2_override;
  } else {
    measure_memory();
    if (spec_.l1_override >= 0) l1_ = spec_.l1_override;
    if (spec_.l2_override >= 0) l2_ = spec_.l2_override;
  }
}

void ChannelModel::measure_memory() {
  // Perturb one mid-block symbol and find how far the output change stays
  // above the configured dBc threshold.
  const Constellation c32 = make_apsk32();
  const int n = 512;
  const int j = n / 2;
  SymbolBlock x = random_symbols(c32, n, kCalibSeed + 1);
  SymbolBlock y0 = simulate(x);

  int lo = j, hi = j;
  const double thr_rel = undb20(spec_.memory_threshold_dbc);
  for (int probe = 0; probe < 3; ++probe) {
    SymbolBlock xp = x;
    xp[j] += 0.3 * std::polar(1.0, 2.0 * kPi * probe / 3.0 + 0.37);
    SymbolBlock yp = simulate(xp);
    double peak = 0.0;
    std::vector<double> d(n);
    for (int i = 0; i < n; ++i) {
      d[i] = std::abs(yp[i] - y0[i]);
      peak = std::max(peak, d[i]);
    }
    const double thr = thr_rel * peak;
    for (int i = 0; i < n; ++i) {
      if (d[i] > thr) {
        lo = std::min(lo, i);
        hi = std::max(hi, i);
      }
    }
  }
  l1_ = j - lo;
  l2_ = hi - j;
}

SymbolBlock ChannelModel::simulate(const SymbolBlock& x) const {
  if (x.empty()) throw std::invalid_argument("simulate: empty block");
  ComplexSignal u = fir_filter(upsample_insert_zeros(x, spec_.osf), front_);
  for (cplx& v : u.samples) v = spec_.hpa.apply(drive_gain_ * v);
  ComplexSignal w = fir_filter(u, back_);
  SymbolBlock y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    y[n] = output_gain_ * w.samples[n * spec_.osf];
  }
  return y;
}

SymbolBlock add_awgn(const SymbolBlock& y, double esn0_db,
                     std::uint64_t seed) {
  if (!std::isfinite(esn0_db)) {
    if (esn0_db > 0) return y;  // +inf sentinel: noiseless
    throw std::invalid_argument("add_awgn: esn0_db must be finite or +inf");
  }
  double es = mean_power(y);
  double n0 = es * undb10(-esn0_db);
  double sigma = std::sqrt(n0 / 2.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SymbolBlock out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = y[i] + sigma * cplx(gauss(rng), gauss(rng));
  }
  return out;
}

OperatingPoint measure_operating_point(const ChannelModel& ch,
                                       const SymbolBlock& x) {
  if (x.empty()) throw std::invalid_argument("operating point: empty block");
  const ChannelSpec& spec = ch.spec();
  ComplexSignal u =
      fir_filter(upsample_insert_zeros(x, spec.osf), ch.front());
  for (cplx& v : u.samples) v *= ch.drive_gain();
  double p_in = mean_power(u.samples);
  if (p_in <= 0.0) {
    throw std::invalid_argument("operating point: zero-power input");
  }
  for (cplx& v : u.samples) v = spec.hpa.apply(v);
  double p_out = mean_power(u.samples);
  ComplexSignal w = fir_filter(u, ch.omux());
  double p_omux = mean_power(w.samples);

  double in_sat = spec.hpa.input_saturation();
  double out_sat = spec.hpa.output_saturation();
  OperatingPoint op;
  op.ibo_db = db10(in_sat * in_sat / p_in);
  op.obo_db = db10(out_sat * out_sat / p_out);
  op.omux_loss_db = db10(p_out / p_omux);
  return op;
}

}  // namespace satdpd
