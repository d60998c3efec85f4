#pragma once

#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>

#include "satdpd/channel.hpp"
#include "satdpd/volterra.hpp"

namespace satdpd {

/// Complexity instrumentation. Increments follow a fixed per-operation cost
/// model (documented at each charge site) rather than profiling the
/// hardware; div covers divisions and matrix inversions.
struct OpCounter {
  std::uint64_t mult = 0;
  std::uint64_t add = 0;
  std::uint64_t div = 0;
  std::uint64_t lut_lookups = 0;

  /// Quadratic objective assembly/evaluation over a w-element window:
  /// 10 multiplies per element, 5 additions per element beyond the first.
  void charge_norm_eval(int w) {
    mult += 10ull * static_cast<std::uint64_t>(w);
    if (w > 1) add += 5ull * static_cast<std::uint64_t>(w - 1);
  }
  /// 2x2 real solve: 4 multiplies and 2 additions past the inversion.
  void charge_solve2x2() {
    mult += 4;
    add += 2;
    div += 2;
  }
  /// Error update through the linearized response over a w-element window.
  void charge_eps_update(int w) {
    mult += 4ull * static_cast<std::uint64_t>(w);
    add += 4ull * static_cast<std::uint64_t>(w);
  }
  /// One kernel of order p contributing to a coefficient: 4p multiplies,
  /// 2 additions.
  void charge_kernel_coeff(int order) {
    mult += 4ull * static_cast<std::uint64_t>(order);
    add += 2;
  }
  /// Solving the two probe relations for one output: 4 additions and 4
  /// divisions.
  void charge_probe_solve() {
    add += 4;
    div += 4;
  }

  OpCounter operator-(const OpCounter& o) const {
    return OpCounter{mult - o.mult, add - o.add, div - o.div,
                     lut_lookups - o.lut_lookups};
  }
};

/// First-order sensitivities of the outputs near one input symbol: for the
/// window n in [n_start, n_start + size), output n responds to a
/// perturbation d of the input symbol as a10[n] d + a01[n] conj(d).
struct LinearCoeffs {
  long n_start = 0;
  std::vector<cplx> a10;
  std::vector<cplx> a01;

  long size() const { return static_cast<long>(a10.size()); }
  long n_end() const { return n_start + size(); }
  bool all_zero() const;
};

/// Exact block model with incremental windowed evaluation. Implementations
/// keep whatever caches they need for the current block; output_delta
/// reports the exact output change of a candidate single-symbol update
/// without committing it, apply commits one.
class StepModel {
 public:
  virtual ~StepModel() = default;

  virtual int l1() const = 0;  // anti-causal symbol-rate memory
  virtual int l2() const = 0;  // causal symbol-rate memory
  int lc() const { return l1() + l2() + 1; }

  virtual long block_size() const = 0;
  virtual const SymbolBlock& current_input() const = 0;

  /// Rebuild all caches for input block x.
  virtual void reset(const SymbolBlock& x) = 0;
  /// Output of the model for the current input, recomputed from scratch.
  virtual SymbolBlock eval_current() = 0;
  /// Exact y-change on [n_start, n_start+len) if x(j) were changed by delta.
  virtual std::vector<cplx> output_delta(long j, cplx delta, long n_start,
                                         long len) = 0;
  /// Commit x(j) += delta into the caches.
  virtual void apply(long j, cplx delta) = 0;
};

/// StepModel over the oversampled channel simulator. Caches the HPA input
/// and output signals; a single-symbol update touches only the samples under
/// the transmit-side filter support.
class ChannelStepModel : public StepModel {
 public:
  ChannelStepModel(const ChannelModel& ch, const SymbolBlock& x0);

  int l1() const override { return ch_.l1(); }
  int l2() const override { return ch_.l2(); }
  long block_size() const override { return static_cast<long>(x_.size()); }
  const SymbolBlock& current_input() const override { return x_; }

  void reset(const SymbolBlock& x) override;
  SymbolBlock eval_current() override;
  std::vector<cplx> output_delta(long j, cplx delta, long n_start,
                                 long len) override;
  void apply(long j, cplx delta) override;

 private:
  const ChannelModel& ch_;
  SymbolBlock x_;
  std::vector<cplx> u_;  // HPA input (drive gain applied)
  std::vector<cplx> v_;  // HPA output

  // Sample range of u/v affected by symbol j, intersected with the signal.
  std::pair<long, long> touched_samples(long j) const;
};

/// StepModel over a kernel set. Window updates re-evaluate the affected
/// outputs exactly, so the cached output never drifts.
class KernelStepModel : public StepModel {
 public:
  KernelStepModel(std::shared_ptr<const VolterraKernels> k,
                  const SymbolBlock& x0);

  int l1() const override { return kernels_->l1(); }
  int l2() const override { return kernels_->l2(); }
  long block_size() const override { return static_cast<long>(x_.size()); }
  const SymbolBlock& current_input() const override { return x_; }

  void reset(const SymbolBlock& x) override;
  SymbolBlock eval_current() override;
  std::vector<cplx> output_delta(long j, cplx delta, long n_start,
                                 long len) override;
  void apply(long j, cplx delta) override;

  const VolterraKernels& kernels() const { return *kernels_; }

 private:
  std::shared_ptr<const VolterraKernels> kernels_;
  SymbolBlock x_;
};

/// Two-probe finite-difference estimate of the linear coefficients around
/// input symbol j: probes with a real and an imaginary perturbation of
/// magnitude probe_eps and solves the per-output 2x2 relations.
LinearCoeffs estimate_coeffs_sim(StepModel& model, long j, double probe_eps,
                                 OpCounter* cnt = nullptr);

/// Analytic coefficients from a kernel set: derivative of each stored
/// kernel's monomial with respect to x(j) and conj(x(j)) at the current
/// block values. Kernels with no index equal to n - j do not contribute.
LinearCoeffs estimate_coeffs_volterra(const VolterraKernels& k,
                                      const SymbolBlock& x, long j,
                                      OpCounter* cnt = nullptr);

struct LutBuildOptions {
  std::size_t max_bytes = 256ull << 20;
  bool lazy = false;           // fill on first use instead of up front
  bool frozen_inputs = true;   // key on the original data symbols
};

/// Precomputed linear coefficients keyed by the rounded symbol window
/// [x(n-l2'), ..., x(n+l1')] around each output n of the window. Interior
/// keys enumerate P^lc constellation tuples; windows that straddle the block
/// edge are computed on demand from the retained kernels.
class LutTable {
 public:
  static LutTable build(std::shared_ptr<const VolterraKernels> reduced,
                        const Constellation& c, int lc,
                        const LutBuildOptions& opts = {});

  /// Coefficient window for a step at symbol j, keyed on key_source (the
  /// original data symbols when frozen_inputs, else the live block).
  LinearCoeffs coeffs(const SymbolBlock& key_source, long j,
                      OpCounter* cnt = nullptr) const;

  std::size_t entry_count() const;
  int lc() const { return lc_; }
  int l1() const { return l1_; }
  int l2() const { return l2_; }
  bool frozen_inputs() const { return frozen_; }
  bool lazy() const { return lazy_; }

  void save(const std::string& path) const;
  /// Reload; serves persisted keys without kernels, so pair with the same
  /// block layout or attach kernels for on-demand edge windows.
  static LutTable load(const std::string& path,
                       std::shared_ptr<const VolterraKernels> kernels = {});

 private:
  std::shared_ptr<const VolterraKernels> kernels_;
  Constellation grid_;
  int lc_ = 0, l1_ = 0, l2_ = 0;
  bool frozen_ = true;
  bool lazy_ = false;
  std::size_t p_ = 0;

  // entry layout: lc pairs (a10, a01) indexed by output offset d + l1.
  std::vector<cplx> dense_;                       // eager interior storage
  mutable std::unordered_map<std::uint64_t, std::vector<cplx>> sparse_;
  mutable std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();

  std::vector<cplx> compute_entry(const std::vector<std::size_t>& key) const;
  const cplx* lookup(const std::vector<std::size_t>& key) const;
};

struct DeltaSolve {
  cplx delta{0.0, 0.0};
  bool degenerate = false;
};

/// Minimizer of sum_n |eps(n) + a10(n) d + a01(n) conj(d)|^2 over complex d
/// via the 2x2 real normal equations in (Re d, Im d). A singular system
/// returns d = 0 with the degenerate flag set.
DeltaSolve solve_delta_lin(const std::vector<cplx>& eps_window,
                           const LinearCoeffs& c, OpCounter* cnt = nullptr);

/// The model objective sum_n |eps(n) + a10(n) d + a01(n) conj(d)|^2.
double linear_objective(const std::vector<cplx>& eps_window,
                        const LinearCoeffs& c, cplx delta);

struct TrustRegionStep {
  double gamma = 1.0;
  cplx delta{0.0, 0.0};
};

/// Scales the proposed step so its magnitude never exceeds delta_max:
/// gamma = 1 when |d| <= delta_max, else delta_max / |d|.
TrustRegionStep trust_region(cplx delta_lin, double delta_max);

enum class CoeffBackend { channel_sim, reduced_volterra, lut };
enum class CheckMode { per_step, per_iteration };

struct PredistortConfig {
  double delta_max = 0.1;
  int max_iters = 10;
  CoeffBackend backend = CoeffBackend::channel_sim;
  CheckMode check_mode = CheckMode::per_step;
  double probe_eps = 1e-4;
  double min_improvement_db = 0.01;
  int refresh_every_iters = 1;  // exact error refresh cadence; 0 disables
  std::shared_ptr<const VolterraKernels> reduced_kernels;  // reduced_volterra
  std::shared_ptr<const LutTable> lut;                     // lut backend
  std::optional<FirFilter> zf;  // start-point pre-filter (symbol rate)
};

CoeffBackend parse_backend(const std::string& name);
CheckMode parse_check_mode(const std::string& name);
std::string to_string(CoeffBackend b);
std::string to_string(CheckMode m);

struct RunTrace {
  std::vector<double> mse_db;       // index 0 = before the first iteration
  std::vector<long> accepts;        // per iteration
  std::vector<long> rejects;        // per iteration
  std::vector<std::uint64_t> mult_count;  // per iteration
  std::vector<std::uint64_t> add_count;   // per iteration
  long degenerate_steps = 0;
  long step_decrease_violations = 0;  // accepted steps failing the check
  int final_iteration = 0;
  bool reverted = false;
  OpCounter totals;

  double final_mse_db() const { return mse_db.back(); }
  void write_csv(std::ostream& os) const;
  void write_csv(const std::string& path) const;
};

struct PredistortResult {
  SymbolBlock x;
  RunTrace trace;
};

/// Per-block iterative pre-distortion. Sweeps j = 1..N once per iteration;
/// each step estimates the linear coefficients with the configured backend,
/// solves for the step, applies the trust region, and either checks the
/// exact windowed error change (per_step) or defers the check to one exact
/// model evaluation at the end of the iteration, reverting the whole
/// iteration when the error grew (per_iteration). The start point is the
/// pre-filtered data block when cfg.zf is set.
PredistortResult predistort_block(const SymbolBlock& s, StepModel& model,
                                  const PredistortConfig& cfg);
PredistortResult predistort_block(const SymbolBlock& s, const ChannelModel& ch,
                                  const PredistortConfig& cfg);
PredistortResult predistort_block(const SymbolBlock& s,
                                  std::shared_ptr<const VolterraKernels> k,
                                  const PredistortConfig& cfg);

struct GridSpec {
  cplx center{0.0, 0.0};
  double extent = 1.0;   // half width of the scanned square
  double pitch = 1e-2;   // grid step
};

/// Exhaustive minimizer of the windowed squared error over a complex grid
/// of candidate values for x(j). Desk-scale sizes only. Returns the best
/// grid value for x(j).
cplx exact_step_oracle(const SymbolBlock& s, StepModel& model, long j,
                       const GridSpec& grid);

/// Symbol-rate inverse of the channel's identified linear response.
/// Throws std::domain_error on a spectral null.
FirFilter zf_prefilter(const ChannelModel& ch, int ntaps = 63,
                       int linear_window = 8, int n_train = 4096,
                       std::uint64_t seed = 7);

}  // namespace satdpd
