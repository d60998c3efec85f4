#include "satdpd/dsp.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace satdpd {

namespace {
constexpr double kPi = std::numbers::pi;
}

FirFilter delta_filter() { return FirFilter{{cplx(1.0, 0.0)}, 0}; }

FirFilter design_srrc(double rolloff, int span_symbols, int osf) {
  if (!(rolloff > 0.0) || rolloff > 1.0) {
    throw std::invalid_argument("design_srrc: rolloff must be in (0, 1]");
  }
  if (span_symbols < 1 || osf < 1 || span_symbols * osf < 2) {
    throw std::invalid_argument("design_srrc: span_symbols*osf must be >= 2");
  }

  const int len = span_symbols * osf + 1;
  const int center = len / 2;
  std::vector<cplx> taps(len);

  for (int i = 0; i < len; ++i) {
    const double t = static_cast<double>(i - center) / osf;  // symbol periods
    double v;
    const double den = 1.0 - 16.0 * rolloff * rolloff * t * t;
    if (t == 0.0) {
      v = 1.0 - rolloff + 4.0 * rolloff / kPi;
    } else if (std::abs(den) < 1e-9) {
      const double arg = kPi / (4.0 * rolloff);
      v = rolloff / std::sqrt(2.0) *
          ((1.0 + 2.0 / kPi) * std::sin(arg) +
           (1.0 - 2.0 / kPi) * std::cos(arg));
    } else {
      v = (std::sin(kPi * t * (1.0 - rolloff)) +
           4.0 * rolloff * t * std::cos(kPi * t * (1.0 + rolloff))) /
          (kPi * t * den);
    }
    taps[i] = cplx(v, 0.0);
  }

  // Cosine taper on the outer half of the pulse. A hard truncation leaves
  // an edge discontinuity whose ringing dominates the symbol-instant ISI of
  // the matched cascade; the taper trades it for a smaller shape error.
  constexpr double kTaperStart = 0.5;
  for (int i = 0; i < len; ++i) {
    const double u = std::abs(static_cast<double>(i - center) / (len / 2));
    if (u > kTaperStart) {
      taps[i] *= 0.5 + 0.5 * std::cos(kPi * (u - kTaperStart) /
                                      (1.0 - kTaperStart));
    }
  }

  // Exact even symmetry despite floating-point evaluation order.
  for (int i = 0; i < len / 2; ++i) {
    cplx avg = 0.5 * (taps[i] + taps[len - 1 - i]);
    taps[i] = avg;
    taps[len - 1 - i] = avg;
  }

  double energy = 0.0;
  for (const cplx& c : taps) energy += std::norm(c);
  const double scale = 1.0 / std::sqrt(energy);
  for (cplx& c : taps) c *= scale;

  return FirFilter{std::move(taps), center};
}

std::vector<cplx> fir_filter(const std::vector<cplx>& x, const FirFilter& f) {
  if (x.empty()) throw std::invalid_argument("fir_filter: empty input");
  if (f.taps.empty()) throw std::invalid_argument("fir_filter: empty taps");
  if (f.delay < 0 || f.delay >= f.length()) {
    throw std::invalid_argument("fir_filter: delay out of range");
  }
  const int n = static_cast<int>(x.size());
  const int m = f.length();
  std::vector<cplx> out(n);
  for (int i = 0; i < n; ++i) {
    // out[i] = sum_k taps[k] * x[i + delay - k]
    const int src_hi = i + f.delay;            // k = 0 reads x[src_hi]
    const int k_lo = std::max(0, src_hi - (n - 1));
    const int k_hi = std::min(m - 1, src_hi);
    cplx acc = 0.0;
    for (int k = k_lo; k <= k_hi; ++k) acc += f.taps[k] * x[src_hi - k];
    out[i] = acc;
  }
  return out;
}

ComplexSignal fir_filter(const ComplexSignal& x, const FirFilter& f) {
  return ComplexSignal{fir_filter(x.samples, f), x.rate};
}

std::vector<cplx> convolve_full(const std::vector<cplx>& a,
                                const std::vector<cplx>& b) {
  if (a.empty() || b.empty()) return {};
  std::vector<cplx> out(a.size() + b.size() - 1, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

FirFilter cascade(const FirFilter& a, const FirFilter& b) {
  return FirFilter{convolve_full(a.taps, b.taps), a.delay + b.delay};
}

ComplexSignal upsample_insert_zeros(const SymbolBlock& s, int osf) {
  if (osf < 1) throw std::invalid_argument("upsample: osf must be >= 1");
  ComplexSignal out;
  out.rate = osf;
  out.samples.assign(s.size() * static_cast<std::size_t>(osf), cplx(0.0, 0.0));
  for (std::size_t k = 0; k < s.size(); ++k) out.samples[k * osf] = s[k];
  return out;
}

SymbolBlock downsample_at_symbol_instants(const ComplexSignal& x, int osf,
                                          int offset) {
  if (osf < 1) throw std::invalid_argument("downsample: osf must be >= 1");
  if (offset < 0 || offset >= osf) {
    throw std::invalid_argument("downsample: offset out of range");
  }
  SymbolBlock out;
  for (std::size_t i = static_cast<std::size_t>(offset); i < x.samples.size();
       i += static_cast<std::size_t>(osf)) {
    out.push_back(x.samples[i]);
  }
  return out;
}

namespace {

void normalize_energy(Constellation& c) {
  double p = mean_power(c.points);
  const double scale = 1.0 / std::sqrt(p);
  for (cplx& z : c.points) z *= scale;
}

std::uint32_t gray(std::uint32_t i) { return i ^ (i >> 1); }

}  // namespace

Constellation make_apsk32() {
  Constellation c;
  c.label = "32apsk";
  c.bits_per_symbol = 5;

  // Ring radius ratios for the code-rate-3/4 operating point.
  const double g1 = 2.84;
  const double g2 = 5.27;
  const double r1 = 1.0;
  const double r2 = g1;
  const double r3 = g2;

  // 4 + 12 + 16 points; each ring offset by half its angular spacing.
  for (int k = 0; k < 4; ++k) {
    double phi = kPi / 4.0 + k * kPi / 2.0;
    c.points.push_back(r1 * cplx(std::cos(phi), std::sin(phi)));
    c.bits.push_back(0x00u | gray(static_cast<std::uint32_t>(k)));
  }
  for (int k = 0; k < 12; ++k) {
    double phi = kPi / 12.0 + k * kPi / 6.0;
    c.points.push_back(r2 * cplx(std::cos(phi), std::sin(phi)));
    c.bits.push_back(0x08u | gray(static_cast<std::uint32_t>(k)));
  }
  for (int k = 0; k < 16; ++k) {
    double phi = kPi / 16.0 + k * kPi / 8.0;
    c.points.push_back(r3 * cplx(std::cos(phi), std::sin(phi)));
    c.bits.push_back(0x10u | gray(static_cast<std::uint32_t>(k)));
  }
  normalize_energy(c);
  return c;
}

Constellation make_qpsk() {
  Constellation c;
  c.label = "qpsk";
  c.bits_per_symbol = 2;
  for (int k = 0; k < 4; ++k) {
    double phi = kPi / 4.0 + k * kPi / 2.0;
    c.points.push_back(cplx(std::cos(phi), std::sin(phi)));
    c.bits.push_back(gray(static_cast<std::uint32_t>(k)));
  }
  normalize_energy(c);
  return c;
}

std::size_t nearest_point(cplx z, const Constellation& c) {
  std::size_t best = 0;
  double best_d = std::norm(z - c.points[0]);
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    double d = std::norm(z - c.points[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<std::size_t> random_symbol_indices(const Constellation& c,
                                               std::size_t n,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> dist(0, c.points.size() - 1);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = dist(rng);
  return out;
}

SymbolBlock random_symbols(const Constellation& c, std::size_t n,
                           std::uint64_t seed) {
  std::vector<std::size_t> idx = random_symbol_indices(c, n, seed);
  SymbolBlock out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = c.points[idx[i]];
  return out;
}

FirFilter design_from_frequency_response(
    const std::function<cplx(double)>& h_of_f, double fs, int ntaps,
    int nfft) {
  if (ntaps < 1 || ntaps % 2 == 0) {
    throw std::invalid_argument("design_from_frequency_response: ntaps odd");
  }
  if (nfft < 2 * ntaps) {
    throw std::invalid_argument("design_from_frequency_response: nfft small");
  }
  std::vector<cplx> grid(nfft);
  const double df = fs / nfft;
  for (int k = 0; k < nfft; ++k) {
    double f = (k <= nfft / 2) ? k * df : (k - nfft) * df;
    grid[k] = h_of_f(f);
  }
  Eigen::FFT<double> fft;
  std::vector<cplx> impulse;
  fft.inv(impulse, grid);

  const int center = ntaps / 2;
  std::vector<cplx> taps(ntaps);
  for (int t = 0; t < ntaps; ++t) {
    int src = t - center;
    if (src < 0) src += nfft;
    taps[t] = impulse[src];
  }

  // Rescale so the realized peak magnitude response equals one.
  std::vector<cplx> padded(nfft, cplx(0.0, 0.0));
  for (int t = 0; t < ntaps; ++t) padded[t] = taps[t];
  std::vector<cplx> resp;
  fft.fwd(resp, padded);
  double peak = 0.0;
  for (const cplx& r : resp) peak = std::max(peak, std::abs(r));
  if (peak <= 0.0) {
    throw std::domain_error("design_from_frequency_response: zero response");
  }
  for (cplx& t : taps) t /= peak;

  return FirFilter{std::move(taps), center};
}

FirFilter design_inverse_fir(const FirFilter& h, int ntaps, int nfft,
                             double min_gain_rel) {
  if (ntaps < 1 || ntaps % 2 == 0) {
    throw std::invalid_argument("design_inverse_fir: ntaps must be odd");
  }
  if (nfft < 2 * std::max(ntaps, h.length())) nfft = 2 * std::max(ntaps, h.length());
  // Round up to a power of two for the FFT grid.
  int n2 = 1;
  while (n2 < nfft) n2 <<= 1;
  nfft = n2;

  std::vector<cplx> padded(nfft, cplx(0.0, 0.0));
  for (int k = 0; k < h.length(); ++k) padded[k] = h.taps[k];
  Eigen::FFT<double> fft;
  std::vector<cplx> resp;
  fft.fwd(resp, padded);

  // Compensate the declared delay so we invert the aligned response.
  double peak = 0.0;
  for (int k = 0; k < nfft; ++k) {
    double w = 2.0 * kPi * k / nfft;
    resp[k] *= std::exp(cplx(0.0, w * h.delay));
    peak = std::max(peak, std::abs(resp[k]));
  }
  for (int k = 0; k < nfft; ++k) {
    if (std::abs(resp[k]) < min_gain_rel * peak) {
      throw std::domain_error(
          "design_inverse_fir: spectral null, response not invertible");
    }
  }

  std::vector<cplx> inv_grid(nfft);
  for (int k = 0; k < nfft; ++k) inv_grid[k] = cplx(1.0, 0.0) / resp[k];
  std::vector<cplx> impulse;
  fft.inv(impulse, inv_grid);

  const int center = ntaps / 2;
  std::vector<cplx> taps(ntaps);
  for (int t = 0; t < ntaps; ++t) {
    int src = t - center;
    if (src < 0) src += nfft;
    taps[t] = impulse[src];
  }
  return FirFilter{std::move(taps), center};
}

}  // namespace satdpd
