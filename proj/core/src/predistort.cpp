#include "satdpd/predistort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace satdpd {

namespace {

inline cplx sample_or_zero(const SymbolBlock& x, long n) {
  if (n < 0 || n >= static_cast<long>(x.size())) return cplx(0.0, 0.0);
  return x[static_cast<std::size_t>(n)];
}

std::string g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

bool LinearCoeffs::all_zero() const {
  for (const cplx& v : a10) {
    if (v != cplx(0.0, 0.0)) return false;
  }
  for (const cplx& v : a01) {
    if (v != cplx(0.0, 0.0)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// ChannelStepModel

ChannelStepModel::ChannelStepModel(const ChannelModel& ch,
                                   const SymbolBlock& x0)
    : ch_(ch) {
  reset(x0);
}

void ChannelStepModel::reset(const SymbolBlock& x) {
  if (x.empty()) throw std::invalid_argument("step model: empty block");
  x_ = x;
  ComplexSignal u =
      fir_filter(upsample_insert_zeros(x_, ch_.osf()), ch_.front());
  const double g = ch_.drive_gain();
  u_.resize(u.samples.size());
  v_.resize(u.samples.size());
  for (std::size_t t = 0; t < u.samples.size(); ++t) {
    u_[t] = g * u.samples[t];
    v_[t] = ch_.hpa().apply(u_[t]);
  }
}

std::pair<long, long> ChannelStepModel::touched_samples(long j) const {
  const long sj = j * ch_.osf();
  const long df = ch_.front().delay;
  const long lf = ch_.front().length();
  const long ns = static_cast<long>(u_.size());
  long t0 = std::max<long>(0, sj - df);
  long t1 = std::min<long>(ns - 1, sj - df + lf - 1);
  return {t0, t1};
}

SymbolBlock ChannelStepModel::eval_current() {
  const long n_sym = static_cast<long>(x_.size());
  const long ns = static_cast<long>(v_.size());
  const FirFilter& back = ch_.back();
  const long lb = back.length();
  const long db = back.delay;
  SymbolBlock y(n_sym);
  for (long n = 0; n < n_sym; ++n) {
    const long m = n * ch_.osf() + db;  // k = 0 reads v_[m]
    const long k_lo = std::max<long>(0, m - (ns - 1));
    const long k_hi = std::min<long>(lb - 1, m);
    cplx acc(0.0, 0.0);
    for (long k = k_lo; k <= k_hi; ++k) acc += back.taps[k] * v_[m - k];
    y[n] = ch_.output_gain() * acc;
  }
  return y;
}

std::vector<cplx> ChannelStepModel::output_delta(long j, cplx delta,
                                                 long n_start, long len) {
  const auto [t0, t1] = touched_samples(j);
  const long sj = j * ch_.osf();
  const long df = ch_.front().delay;
  const FirFilter& front = ch_.front();
  const double g = ch_.drive_gain();

  std::vector<cplx> dv(t1 - t0 + 1);
  for (long t = t0; t <= t1; ++t) {
    const cplx du = g * delta * front.taps[t + df - sj];
    dv[t - t0] = ch_.hpa().apply(u_[t] + du) - v_[t];
  }

  const FirFilter& back = ch_.back();
  const long lb = back.length();
  const long db = back.delay;
  std::vector<cplx> out(len, cplx(0.0, 0.0));
  for (long i = 0; i < len; ++i) {
    const long m = (n_start + i) * ch_.osf() + db;
    const long lo = std::max(t0, m - lb + 1);
    const long hi = std::min(t1, m);
    cplx acc(0.0, 0.0);
    for (long t = lo; t <= hi; ++t) acc += back.taps[m - t] * dv[t - t0];
    out[i] = ch_.output_gain() * acc;
  }
  return out;
}

void ChannelStepModel::apply(long j, cplx delta) {
  const auto [t0, t1] = touched_samples(j);
  const long sj = j * ch_.osf();
  const long df = ch_.front().delay;
  const FirFilter& front = ch_.front();
  const double g = ch_.drive_gain();
  for (long t = t0; t <= t1; ++t) {
    u_[t] += g * delta * front.taps[t + df - sj];
    v_[t] = ch_.hpa().apply(u_[t]);
  }
  x_[static_cast<std::size_t>(j)] += delta;
}

// ---------------------------------------------------------------------------
// KernelStepModel

KernelStepModel::KernelStepModel(std::shared_ptr<const VolterraKernels> k,
                                 const SymbolBlock& x0)
    : kernels_(std::move(k)) {
  if (!kernels_) throw std::invalid_argument("step model: null kernels");
  reset(x0);
}

void KernelStepModel::reset(const SymbolBlock& x) {
  if (x.empty()) throw std::invalid_argument("step model: empty block");
  x_ = x;
}

SymbolBlock KernelStepModel::eval_current() { return kernels_->evaluate(x_); }

std::vector<cplx> KernelStepModel::output_delta(long j, cplx delta,
                                                long n_start, long len) {
  std::vector<cplx> out(len);
  const cplx saved = x_[static_cast<std::size_t>(j)];
  for (long i = 0; i < len; ++i) out[i] = -kernels_->evaluate_at(x_, n_start + i);
  x_[static_cast<std::size_t>(j)] = saved + delta;
  for (long i = 0; i < len; ++i) out[i] += kernels_->evaluate_at(x_, n_start + i);
  x_[static_cast<std::size_t>(j)] = saved;
  return out;
}

void KernelStepModel::apply(long j, cplx delta) {
  x_[static_cast<std::size_t>(j)] += delta;
}

// ---------------------------------------------------------------------------
// Coefficient estimation

LinearCoeffs estimate_coeffs_sim(StepModel& model, long j, double probe_eps,
                                 OpCounter* cnt) {
  if (!(probe_eps > 0.0)) {
    throw std::invalid_argument("estimate_coeffs_sim: probe_eps must be > 0");
  }
  const long n = model.block_size();
  const long n0 = std::max<long>(0, j - model.l1());
  const long n1 = std::min<long>(n - 1, j + model.l2());
  const long len = n1 - n0 + 1;

  const std::vector<cplx> dr =
      model.output_delta(j, cplx(probe_eps, 0.0), n0, len);
  const std::vector<cplx> di =
      model.output_delta(j, cplx(0.0, probe_eps), n0, len);

  LinearCoeffs c;
  c.n_start = n0;
  c.a10.resize(len);
  c.a01.resize(len);
  const cplx jeps(0.0, probe_eps);
  for (long t = 0; t < len; ++t) {
    const cplx s = dr[t] / probe_eps;  // a10 + a01
    const cplx d = di[t] / jeps;       // a10 - a01
    c.a10[t] = 0.5 * (s + d);
    c.a01[t] = 0.5 * (s - d);
    if (cnt) cnt->charge_probe_solve();
  }
  return c;
}

namespace {

// (a10, a01) for a single output n when x(j) is perturbed: derivative of
// each stored monomial with respect to x(j) and conj(x(j)). Slots whose
// index equals n - j contribute the product over the remaining slots.
std::pair<cplx, cplx> coeff_pair_at(const VolterraKernels& k,
                                    const SymbolBlock& x, long j, long n,
                                    OpCounter* cnt) {
  const int d = static_cast<int>(n - j);
  cplx a10(0.0, 0.0), a01(0.0, 0.0);
  for (const auto& [ki, h] : k.entries()) {
    bool involved = false;
    const int m1 = ki.unconjugated_count();
    for (int slot = 0; slot < ki.order; ++slot) {
      if (ki.idx[slot] != d) continue;
      involved = true;
      cplx prod(1.0, 0.0);
      for (int other = 0; other < ki.order; ++other) {
        if (other == slot) continue;
        cplx v = sample_or_zero(x, n - ki.idx[other]);
        prod *= (other < m1) ? v : std::conj(v);
      }
      if (slot < m1) {
        a10 += h * prod;
      } else {
        a01 += h * prod;
      }
    }
    if (involved && cnt) cnt->charge_kernel_coeff(ki.order);
  }
  return {a10, a01};
}

}  // namespace

LinearCoeffs estimate_coeffs_volterra(const VolterraKernels& k,
                                      const SymbolBlock& x, long j,
                                      OpCounter* cnt) {
  const long n = static_cast<long>(x.size());
  const long n0 = std::max<long>(0, j - k.l1());
  const long n1 = std::min<long>(n - 1, j + k.l2());
  const long len = n1 - n0 + 1;
  LinearCoeffs c;
  c.n_start = n0;
  c.a10.resize(len);
  c.a01.resize(len);
  for (long t = 0; t < len; ++t) {
    auto [a10, a01] = coeff_pair_at(k, x, j, n0 + t, cnt);
    c.a10[t] = a10;
    c.a01[t] = a01;
  }
  return c;
}

// ---------------------------------------------------------------------------
// LutTable

LutTable LutTable::build(std::shared_ptr<const VolterraKernels> reduced,
                         const Constellation& c, int lc,
                         const LutBuildOptions& opts) {
  if (!reduced) throw std::invalid_argument("lut: null kernels");
  if (lc < 1) throw std::invalid_argument("lut: lc must be >= 1");
  LutTable t;
  t.kernels_ = std::move(reduced);
  t.grid_ = c;
  t.lc_ = lc;
  t.l1_ = (lc - 1) / 2;
  t.l2_ = lc / 2;
  t.frozen_ = opts.frozen_inputs;
  t.lazy_ = opts.lazy;
  t.p_ = c.points.size();
  if (t.kernels_->l1() > t.l1_ || t.kernels_->l2() > t.l2_) {
    throw std::invalid_argument(
        "lut: kernel memory exceeds the table window; reduce first");
  }

  if (!t.lazy_) {
    double count = std::pow(static_cast<double>(t.p_), lc);
    double bytes = count * lc * 2 * sizeof(cplx);
    if (bytes > static_cast<double>(opts.max_bytes)) {
      std::ostringstream msg;
      msg << "lut: " << count << " entries (" << bytes
          << " bytes) exceed the memory budget of " << opts.max_bytes
          << " bytes; use lazy fill or a smaller window";
      throw std::runtime_error(msg.str());
    }
    const std::size_t n_entries = static_cast<std::size_t>(count);
    t.dense_.resize(n_entries * lc * 2);
    std::vector<std::size_t> key(lc, 0);
    for (std::size_t e = 0; e < n_entries; ++e) {
      std::vector<cplx> entry = t.compute_entry(key);
      std::copy(entry.begin(), entry.end(), t.dense_.begin() + e * lc * 2);
      // increment mixed-radix key (digit 0 fastest)
      for (int q = 0; q < lc; ++q) {
        if (++key[q] < t.p_) break;
        key[q] = 0;
      }
    }
  }
  return t;
}

std::vector<cplx> LutTable::compute_entry(
    const std::vector<std::size_t>& key) const {
  if (!kernels_) {
    throw std::runtime_error(
        "lut: entry missing and no kernel source attached");
  }
  // Local window x at positions q = 0..lc-1 representing n - l2 + q.
  SymbolBlock w(lc_);
  for (int q = 0; q < lc_; ++q) {
    w[q] = (key[q] < p_) ? grid_.points[key[q]] : cplx(0.0, 0.0);
  }
  const long n_local = l2_;
  std::vector<cplx> entry(static_cast<std::size_t>(lc_) * 2);
  for (int d = -l1_; d <= l2_; ++d) {
    const long j_local = n_local - d;
    auto [a10, a01] = coeff_pair_at(*kernels_, w, j_local, n_local, nullptr);
    entry[static_cast<std::size_t>(d + l1_) * 2] = a10;
    entry[static_cast<std::size_t>(d + l1_) * 2 + 1] = a01;
  }
  return entry;
}

const cplx* LutTable::lookup(const std::vector<std::size_t>& key) const {
  bool interior = true;
  for (std::size_t digit : key) {
    if (digit >= p_) {
      interior = false;
      break;
    }
  }
  if (interior && !dense_.empty()) {
    std::size_t idx = 0;
    for (int q = lc_ - 1; q >= 0; --q) idx = idx * p_ + key[q];
    return &dense_[idx * lc_ * 2];
  }
  std::uint64_t code = 0;
  for (int q = lc_ - 1; q >= 0; --q) {
    code = code * (p_ + 1) + key[q];
  }
  std::scoped_lock lock(*mu_);
  auto it = sparse_.find(code);
  if (it == sparse_.end()) {
    it = sparse_.emplace(code, compute_entry(key)).first;
  }
  return it->second.data();
}

LinearCoeffs LutTable::coeffs(const SymbolBlock& key_source, long j,
                              OpCounter* cnt) const {
  const long n = static_cast<long>(key_source.size());
  const long n0 = std::max<long>(0, j - l1_);
  const long n1 = std::min<long>(n - 1, j + l2_);
  const long len = n1 - n0 + 1;
  LinearCoeffs c;
  c.n_start = n0;
  c.a10.resize(len);
  c.a01.resize(len);
  std::vector<std::size_t> key(lc_);
  for (long i = 0; i < len; ++i) {
    const long nn = n0 + i;
    for (int q = 0; q < lc_; ++q) {
      const long t = nn - l2_ + q;
      key[q] = (t < 0 || t >= n)
                   ? p_
                   : nearest_point(key_source[static_cast<std::size_t>(t)],
                                   grid_);
    }
    const cplx* e = lookup(key);
    const long d = nn - j;
    c.a10[i] = e[static_cast<std::size_t>(d + l1_) * 2];
    c.a01[i] = e[static_cast<std::size_t>(d + l1_) * 2 + 1];
    if (cnt) cnt->lut_lookups += 1;
  }
  return c;
}

std::size_t LutTable::entry_count() const {
  if (!dense_.empty()) {
    return dense_.size() / (static_cast<std::size_t>(lc_) * 2);
  }
  std::scoped_lock lock(*mu_);
  return sparse_.size();
}

void LutTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write lut file: " + path);
  const char magic[8] = {'S', 'D', 'P', 'D', 'L', 'U', 'T', '1'};
  out.write(magic, 8);
  auto w32 = [&](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
  };
  w32(static_cast<std::uint32_t>(p_));
  w32(static_cast<std::uint32_t>(lc_));
  w32(frozen_ ? 1u : 0u);
  w32(dense_.empty() ? 0u : 1u);
  // constellation grid so a reloaded table can rebuild keys
  for (const cplx& z : grid_.points) {
    double re = z.real(), im = z.imag();
    out.write(reinterpret_cast<const char*>(&re), 8);
    out.write(reinterpret_cast<const char*>(&im), 8);
  }
  if (!dense_.empty()) {
    out.write(reinterpret_cast<const char*>(dense_.data()),
              static_cast<std::streamsize>(dense_.size() * sizeof(cplx)));
  }
  std::scoped_lock lock(*mu_);
  std::uint64_t count = sparse_.size();
  out.write(reinterpret_cast<const char*>(&count), 8);
  for (const auto& [code, entry] : sparse_) {
    out.write(reinterpret_cast<const char*>(&code), 8);
    out.write(reinterpret_cast<const char*>(entry.data()),
              static_cast<std::streamsize>(entry.size() * sizeof(cplx)));
  }
}

LutTable LutTable::load(const std::string& path,
                        std::shared_ptr<const VolterraKernels> kernels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open lut file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, "SDPDLUT1", 8) != 0) {
    throw std::runtime_error("bad lut file magic: " + path);
  }
  auto r32 = [&]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  LutTable t;
  t.p_ = r32();
  t.lc_ = static_cast<int>(r32());
  t.frozen_ = r32() != 0;
  bool dense = r32() != 0;
  t.l1_ = (t.lc_ - 1) / 2;
  t.l2_ = t.lc_ / 2;
  t.lazy_ = !dense;
  t.kernels_ = std::move(kernels);
  t.grid_.label = "lut-grid";
  t.grid_.points.resize(t.p_);
  for (std::size_t i = 0; i < t.p_; ++i) {
    double re, im;
    in.read(reinterpret_cast<char*>(&re), 8);
    in.read(reinterpret_cast<char*>(&im), 8);
    t.grid_.points[i] = cplx(re, im);
  }
  if (dense) {
    std::size_t count = 1;
    for (int q = 0; q < t.lc_; ++q) count *= t.p_;
    t.dense_.resize(count * t.lc_ * 2);
    in.read(reinterpret_cast<char*>(t.dense_.data()),
            static_cast<std::streamsize>(t.dense_.size() * sizeof(cplx)));
  }
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 8);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t code = 0;
    in.read(reinterpret_cast<char*>(&code), 8);
    std::vector<cplx> entry(static_cast<std::size_t>(t.lc_) * 2);
    in.read(reinterpret_cast<char*>(entry.data()),
            static_cast<std::streamsize>(entry.size() * sizeof(cplx)));
    t.sparse_.emplace(code, std::move(entry));
  }
  if (!in) throw std::runtime_error("truncated lut file: " + path);
  return t;
}

// ---------------------------------------------------------------------------
// Step solve

DeltaSolve solve_delta_lin(const std::vector<cplx>& eps_window,
                           const LinearCoeffs& c, OpCounter* cnt) {
  const long w = c.size();
  if (static_cast<long>(eps_window.size()) != w) {
    throw std::invalid_argument("solve_delta_lin: window size mismatch");
  }
  // Reparameterize in (Re d, Im d): per output, the response is
  // b = a10 + a01 times Re d plus q = i (a10 - a01) times Im d.
  double h_aa = 0.0, h_bb = 0.0, h_ab = 0.0, g_a = 0.0, g_b = 0.0;
  for (long t = 0; t < w; ++t) {
    const cplx b = c.a10[t] + c.a01[t];
    const cplx q = cplx(0.0, 1.0) * (c.a10[t] - c.a01[t]);
    const cplx e = eps_window[static_cast<std::size_t>(t)];
    h_aa += std::norm(b);
    h_bb += std::norm(q);
    h_ab += b.real() * q.real() + b.imag() * q.imag();
    g_a += b.real() * e.real() + b.imag() * e.imag();
    g_b += q.real() * e.real() + q.imag() * e.imag();
  }
  if (cnt) cnt->charge_norm_eval(static_cast<int>(w));

  const double scale = h_aa + h_bb;
  const double det = h_aa * h_bb - h_ab * h_ab;
  if (cnt) cnt->charge_solve2x2();
  if (!(scale > 0.0) || det <= 1e-14 * scale * scale) {
    return DeltaSolve{cplx(0.0, 0.0), true};
  }
  const double a = (-g_a * h_bb + g_b * h_ab) / det;
  const double b = (-g_b * h_aa + g_a * h_ab) / det;
  return DeltaSolve{cplx(a, b), false};
}

double linear_objective(const std::vector<cplx>& eps_window,
                        const LinearCoeffs& c, cplx delta) {
  const long w = c.size();
  if (static_cast<long>(eps_window.size()) != w) {
    throw std::invalid_argument("linear_objective: window size mismatch");
  }
  double acc = 0.0;
  for (long t = 0; t < w; ++t) {
    acc += std::norm(eps_window[static_cast<std::size_t>(t)] +
                     c.a10[t] * delta + c.a01[t] * std::conj(delta));
  }
  return acc;
}

TrustRegionStep trust_region(cplx delta_lin, double delta_max) {
  if (!(delta_max > 0.0)) {
    throw std::invalid_argument("trust_region: delta_max must be > 0");
  }
  const double mag = std::abs(delta_lin);
  if (mag <= delta_max) return TrustRegionStep{1.0, delta_lin};
  const double gamma = delta_max / mag;
  return TrustRegionStep{gamma, gamma * delta_lin};
}

CoeffBackend parse_backend(const std::string& name) {
  if (name == "channel_sim") return CoeffBackend::channel_sim;
  if (name == "reduced_volterra") return CoeffBackend::reduced_volterra;
  if (name == "lut") return CoeffBackend::lut;
  throw std::runtime_error("unknown backend: " + name);
}

CheckMode parse_check_mode(const std::string& name) {
  if (name == "per_step") return CheckMode::per_step;
  if (name == "per_iteration") return CheckMode::per_iteration;
  throw std::runtime_error("unknown check mode: " + name);
}

std::string to_string(CoeffBackend b) {
  switch (b) {
    case CoeffBackend::channel_sim:
      return "channel_sim";
    case CoeffBackend::reduced_volterra:
      return "reduced_volterra";
    case CoeffBackend::lut:
      return "lut";
  }
  return "?";
}

std::string to_string(CheckMode m) {
  return m == CheckMode::per_step ? "per_step" : "per_iteration";
}

void RunTrace::write_csv(std::ostream& os) const {
  os << "iteration,mse_db,accepts,rejects,mult_count,add_count\n";
  for (std::size_t i = 0; i < mse_db.size(); ++i) {
    const long acc = i == 0 ? 0 : accepts[i - 1];
    const long rej = i == 0 ? 0 : rejects[i - 1];
    const std::uint64_t mc = i == 0 ? 0 : mult_count[i - 1];
    const std::uint64_t ac = i == 0 ? 0 : add_count[i - 1];
    os << i << "," << g6(mse_db[i]) << "," << acc << "," << rej << "," << mc
       << "," << ac << "\n";
  }
}

void RunTrace::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace csv: " + path);
  write_csv(out);
}

// ---------------------------------------------------------------------------
// Block iteration

namespace {

double block_mse_db(const std::vector<cplx>& eps, double s_power) {
  double e = 0.0;
  for (const cplx& v : eps) e += std::norm(v);
  double r = e / s_power;
  if (!(r > 1e-20)) return -200.0;
  return std::max(db10(r), -200.0);
}

}  // namespace

PredistortResult predistort_block(const SymbolBlock& s, StepModel& model,
                                  const PredistortConfig& cfg) {
  const long n = static_cast<long>(s.size());
  if (n < 1) throw std::invalid_argument("predistort: empty block");
  if (cfg.backend == CoeffBackend::reduced_volterra && !cfg.reduced_kernels) {
    throw std::invalid_argument(
        "predistort: reduced_volterra backend needs reduced_kernels");
  }
  if (cfg.backend == CoeffBackend::lut && !cfg.lut) {
    throw std::invalid_argument("predistort: lut backend needs a lut table");
  }
  double s_power = 0.0;
  for (const cplx& v : s) s_power += std::norm(v);
  if (!(s_power > 0.0)) {
    throw std::invalid_argument("predistort: zero-power data block");
  }

  SymbolBlock x0 = cfg.zf ? fir_filter(s, *cfg.zf) : s;
  model.reset(x0);

  std::vector<cplx> eps(n);
  {
    SymbolBlock y = model.eval_current();
    for (long i = 0; i < n; ++i) eps[i] = y[i] - s[i];
  }

  RunTrace trace;
  trace.mse_db.push_back(block_mse_db(eps, s_power));

  auto backend_coeffs = [&](long j) -> LinearCoeffs {
    switch (cfg.backend) {
      case CoeffBackend::channel_sim:
        return estimate_coeffs_sim(model, j, cfg.probe_eps, &trace.totals);
      case CoeffBackend::reduced_volterra:
        return estimate_coeffs_volterra(*cfg.reduced_kernels,
                                        model.current_input(), j,
                                        &trace.totals);
      case CoeffBackend::lut:
        return cfg.lut->coeffs(
            cfg.lut->frozen_inputs() ? s : model.current_input(), j,
            &trace.totals);
    }
    return {};
  };

  SymbolBlock x_kept = model.current_input();  // revert target
  double mse_prev = trace.mse_db.back();
  OpCounter prev_totals = trace.totals;

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    long accepts = 0, rejects = 0;

    for (long j = 0; j < n; ++j) {
      LinearCoeffs co = backend_coeffs(j);
      if (co.size() == 0 || co.all_zero()) {
        ++trace.degenerate_steps;
        continue;
      }
      std::vector<cplx> ew(co.a10.size());
      for (long t = 0; t < co.size(); ++t) {
        ew[static_cast<std::size_t>(t)] =
            eps[static_cast<std::size_t>(co.n_start + t)];
      }
      DeltaSolve sol = solve_delta_lin(ew, co, &trace.totals);
      if (sol.degenerate) {
        ++trace.degenerate_steps;
        continue;
      }
      TrustRegionStep tr = trust_region(sol.delta, cfg.delta_max);
      const cplx d = tr.delta;
      if (d == cplx(0.0, 0.0)) continue;

      if (cfg.check_mode == CheckMode::per_step) {
        const long w0 = std::max<long>(0, j - model.l1());
        const long w1 = std::min<long>(n - 1, j + model.l2());
        const long wlen = w1 - w0 + 1;
        std::vector<cplx> dy = model.output_delta(j, d, w0, wlen);
        double before = 0.0, after = 0.0;
        for (long t = 0; t < wlen; ++t) {
          const cplx e = eps[static_cast<std::size_t>(w0 + t)];
          before += std::norm(e);
          after += std::norm(e + dy[static_cast<std::size_t>(t)]);
        }
        if (after <= before) {
          model.apply(j, d);
          for (long t = 0; t < wlen; ++t) {
            eps[static_cast<std::size_t>(w0 + t)] +=
                dy[static_cast<std::size_t>(t)];
          }
          trace.totals.charge_eps_update(static_cast<int>(wlen));
          ++accepts;
        } else {
          ++rejects;
        }
      } else {
        // Deferred checking: apply unconditionally, track the error through
        // the linearized response, verify once at the end of the iteration.
        model.apply(j, d);
        for (long t = 0; t < co.size(); ++t) {
          eps[static_cast<std::size_t>(co.n_start + t)] +=
              co.a10[t] * d + co.a01[t] * std::conj(d);
        }
        trace.totals.charge_eps_update(static_cast<int>(co.size()));
        ++accepts;
      }
    }

    const bool refresh =
        cfg.check_mode == CheckMode::per_iteration ||
        (cfg.refresh_every_iters > 0 &&
         iter % cfg.refresh_every_iters == 0) ||
        iter == cfg.max_iters;
    if (refresh) {
      SymbolBlock y = model.eval_current();
      for (long i = 0; i < n; ++i) eps[i] = y[i] - s[i];
    }
    const double mse = block_mse_db(eps, s_power);

    if (cfg.check_mode == CheckMode::per_iteration && mse > mse_prev) {
      // The linearity assumption broke somewhere in this sweep: keep the
      // previous iteration's block and stop.
      model.reset(x_kept);
      trace.reverted = true;
      trace.final_iteration = iter - 1;
      PredistortResult out;
      out.x = x_kept;
      out.trace = std::move(trace);
      return out;
    }

    trace.mse_db.push_back(mse);
    trace.accepts.push_back(accepts);
    trace.rejects.push_back(rejects);
    OpCounter delta_cnt = trace.totals - prev_totals;
    trace.mult_count.push_back(delta_cnt.mult);
    trace.add_count.push_back(delta_cnt.add);
    prev_totals = trace.totals;
    trace.final_iteration = iter;
    x_kept = model.current_input();

    if (mse_prev - mse < cfg.min_improvement_db) {
      break;
    }
    mse_prev = mse;
  }

  PredistortResult out;
  out.x = model.current_input();
  out.trace = std::move(trace);
  return out;
}

PredistortResult predistort_block(const SymbolBlock& s, const ChannelModel& ch,
                                  const PredistortConfig& cfg) {
  ChannelStepModel model(ch, s);
  return predistort_block(s, model, cfg);
}

PredistortResult predistort_block(const SymbolBlock& s,
                                  std::shared_ptr<const VolterraKernels> k,
                                  const PredistortConfig& cfg) {
  KernelStepModel model(std::move(k), s);
  return predistort_block(s, model, cfg);
}

cplx exact_step_oracle(const SymbolBlock& s, StepModel& model, long j,
                       const GridSpec& grid) {
  const long n = model.block_size();
  const long w0 = std::max<long>(0, j - model.l1());
  const long w1 = std::min<long>(n - 1, j + model.l2());
  const long wlen = w1 - w0 + 1;

  SymbolBlock y = model.eval_current();
  std::vector<cplx> eps0(wlen);
  for (long t = 0; t < wlen; ++t) {
    eps0[static_cast<std::size_t>(t)] =
        y[static_cast<std::size_t>(w0 + t)] - s[static_cast<std::size_t>(w0 + t)];
  }
  const cplx xj = model.current_input()[static_cast<std::size_t>(j)];

  const long half = std::lround(grid.extent / grid.pitch);
  cplx best = xj;
  double best_obj = 0.0;
  for (long t = 0; t < wlen; ++t) best_obj += std::norm(eps0[t]);

  for (long a = -half; a <= half; ++a) {
    for (long b = -half; b <= half; ++b) {
      const cplx cand =
          grid.center + cplx(a * grid.pitch, b * grid.pitch);
      const std::vector<cplx> dy =
          model.output_delta(j, cand - xj, w0, wlen);
      double obj = 0.0;
      for (long t = 0; t < wlen; ++t) {
        obj += std::norm(eps0[static_cast<std::size_t>(t)] +
                         dy[static_cast<std::size_t>(t)]);
      }
      if (obj < best_obj) {
        best_obj = obj;
        best = cand;
      }
    }
  }
  return best;
}

FirFilter zf_prefilter(const ChannelModel& ch, int ntaps, int linear_window,
                       int n_train, std::uint64_t seed) {
  IdentifyResult id =
      identify(ch, 1, linear_window, linear_window, n_train, 1e-8, seed);
  FirFilter h;
  h.taps.resize(2 * linear_window + 1);
  h.delay = linear_window;
  for (int d = -linear_window; d <= linear_window; ++d) {
    h.taps[static_cast<std::size_t>(d + linear_window)] = id.kernels.get(1, {d});
  }
  return design_inverse_fir(h, ntaps, 1024);
}

}  // namespace satdpd
