#pragma once

#include <map>
#include <string>

#include "satdpd/channel.hpp"
#include "satdpd/types.hpp"

namespace satdpd {

/// Index of one kernel of the odd-order polynomial-with-memory model
///   y(n) = sum_k H_k * prod_{i<=m} x(n - idx[i]) * prod_{i>m} conj(x(n - idx[i]))
/// for order 2m+1. The first m+1 slots multiply the signal, the remaining m
/// slots its conjugate. Canonical form sorts each group ascending; indices
/// that differ only by within-group permutation address the same monomial.
struct KernelIndex {
  int order = 1;
  std::vector<int> idx;

  static KernelIndex canonical(int order, std::vector<int> indices);

  int unconjugated_count() const { return (order + 1) / 2; }
  int distinct_count() const;
  int min_index() const;
  int max_index() const;

  bool operator<(const KernelIndex& o) const;
  bool operator==(const KernelIndex& o) const {
    return order == o.order && idx == o.idx;
  }
};

/// Sparse odd-order kernel set over the index window [-l1, l2]. The stored
/// value is the coefficient of the canonical monomial. Out-of-range signal
/// history reads as zero when evaluating.
class VolterraKernels {
 public:
  VolterraKernels() = default;
  VolterraKernels(int l1, int l2, int max_order);

  /// Canonicalizes, then sets (zero erases the entry).
  void set(int order, std::vector<int> indices, cplx value);
  /// Canonicalizes, then accumulates.
  void add(int order, std::vector<int> indices, cplx value);
  cplx get(int order, std::vector<int> indices) const;

  const std::map<KernelIndex, cplx>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  int l1() const { return l1_; }
  int l2() const { return l2_; }
  int max_order() const { return max_order_; }

  SymbolBlock evaluate(const SymbolBlock& x) const;
  /// Single output sample (same zero-padded edge rule).
  cplx evaluate_at(const SymbolBlock& x, long n) const;

 private:
  std::map<KernelIndex, cplx> entries_;
  int l1_ = 0, l2_ = 0;
  int max_order_ = 1;

  void check_index(const KernelIndex& k) const;
};

struct IdentifyResult {
  VolterraKernels kernels;
  double residual_db = 0.0;  // residual power over output power
  double cond = 0.0;         // condition estimate of the normal equations
  long n_rows = 0;
  long n_cols = 0;
};

/// All canonical indices with odd order <= max_order over [-l1, l2].
std::vector<KernelIndex> enumerate_kernels(int max_order, int l1, int l2);

/// Least-squares fit of canonical monomials to paired input/output blocks.
/// ridge is relative to the mean regressor power (trace-normalized). Throws
/// std::runtime_error with a condition diagnostic when the normal equations
/// are ill-conditioned beyond ridge repair.
IdentifyResult identify_from_data(const SymbolBlock& x, const SymbolBlock& y,
                                  int max_order, int l1, int l2,
                                  double ridge = 1e-8);

/// Drives the simulator with a random training block, then fits.
IdentifyResult identify(const ChannelModel& ch, int max_order, int l1, int l2,
                        int n_train, double ridge = 1e-8,
                        std::uint64_t seed = 1);

/// Keeps kernels of order <= max_order whose indices all lie inside the
/// length-lc_reduced window [-floor((lc-1)/2), ceil((lc-1)/2)] and that use
/// at most max_distinct_indices distinct index values.
VolterraKernels reduce(const VolterraKernels& k, int max_order, int lc_reduced,
                       int max_distinct_indices);

/// Text format: one entry per line, "order n_1 ... n_order re im".
/// Round-trips bit-exactly.
void save_kernels(const VolterraKernels& k, const std::string& path);
VolterraKernels load_kernels(const std::string& path);

}  // namespace satdpd
