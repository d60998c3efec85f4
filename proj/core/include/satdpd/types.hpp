#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

namespace satdpd {

using cplx = std::complex<double>;

/// Block of symbol-rate complex symbols.
using SymbolBlock = std::vector<cplx>;

/// Sample-rate complex baseband signal. `rate` is the integer number of
/// samples per symbol (the oversampling factor).
struct ComplexSignal {
  std::vector<cplx> samples;
  int rate = 1;
};

inline double db10(double x) { return 10.0 * std::log10(x); }
inline double undb10(double x_db) { return std::pow(10.0, x_db / 10.0); }
inline double db20(double x) { return 20.0 * std::log10(x); }
inline double undb20(double x_db) { return std::pow(10.0, x_db / 20.0); }

inline double mean_power(const std::vector<cplx>& v) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (const cplx& z : v) acc += std::norm(z);
  return acc / static_cast<double>(v.size());
}

inline bool all_finite(const std::vector<cplx>& v) {
  for (const cplx& z : v) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

}  // namespace satdpd
