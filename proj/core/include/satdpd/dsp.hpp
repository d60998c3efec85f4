#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "satdpd/types.hpp"

namespace satdpd {

/// FIR filter with an explicit group delay used by the aligned (same-length)
/// filtering convention: out[n] = sum_k taps[k] * in[n + delay - k], with
/// out-of-range inputs read as zero. Symmetric odd-length filters use
/// delay = (len-1)/2 so that filtering preserves signal alignment.
struct FirFilter {
  std::vector<cplx> taps;
  int delay = 0;

  int length() const { return static_cast<int>(taps.size()); }
};

/// Single-tap identity filter.
FirFilter delta_filter();

/// Square-root raised-cosine pulse. Unit energy, even symmetry, length
/// span_symbols*osf+1, delay at the center tap.
FirFilter design_srrc(double rolloff, int span_symbols, int osf);

/// Aligned same-length linear convolution (see FirFilter).
std::vector<cplx> fir_filter(const std::vector<cplx>& x, const FirFilter& f);
ComplexSignal fir_filter(const ComplexSignal& x, const FirFilter& f);

/// Full linear convolution of two tap vectors (length a+b-1).
std::vector<cplx> convolve_full(const std::vector<cplx>& a,
                                const std::vector<cplx>& b);

/// Cascade of two aligned filters as a single aligned filter.
FirFilter cascade(const FirFilter& a, const FirFilter& b);

/// Zero insertion: symbol k lands on sample k*osf.
ComplexSignal upsample_insert_zeros(const SymbolBlock& s, int osf);

/// Picks samples offset + k*osf. offset must lie in [0, osf).
SymbolBlock downsample_at_symbol_instants(const ComplexSignal& x, int osf,
                                          int offset);

/// Constellation with unit average energy and a per-point bit label used by
/// BER counting.
struct Constellation {
  std::vector<cplx> points;
  std::string label;
  std::vector<std::uint32_t> bits;  // bits[i] = label of points[i]
  int bits_per_symbol = 0;
};

/// DVB-S2 32-APSK ring geometry (4+12+16, code-rate-3/4 radius ratios),
/// normalized to unit average energy, quasi-Gray bit labels.
Constellation make_apsk32();

/// Unit-energy QPSK with Gray labels.
Constellation make_qpsk();

/// Index of the closest constellation point; ties resolve to the lowest
/// index.
std::size_t nearest_point(cplx z, const Constellation& c);

/// Uniform random symbols drawn from a constellation, reproducible by seed.
SymbolBlock random_symbols(const Constellation& c, std::size_t n,
                           std::uint64_t seed);

/// Indices of the symbols drawn by random_symbols for the same seed.
std::vector<std::size_t> random_symbol_indices(const Constellation& c,
                                               std::size_t n,
                                               std::uint64_t seed);

/// Zero-phase FIR synthesized by sampling h_of_f (argument in Hz, two-sided)
/// on an nfft grid at sample rate fs and windowing the impulse response to
/// ntaps (odd). Taps are rescaled so the realized peak gain is one.
FirFilter design_from_frequency_response(
    const std::function<cplx(double)>& h_of_f, double fs, int ntaps, int nfft);

/// FIR approximating the inverse of h via frequency-domain inversion.
/// Throws std::domain_error if |H| dips below min_gain_rel times its peak
/// anywhere on the grid (spectral null).
FirFilter design_inverse_fir(const FirFilter& h, int ntaps, int nfft = 1024,
                             double min_gain_rel = 1e-3);

}  // namespace satdpd
