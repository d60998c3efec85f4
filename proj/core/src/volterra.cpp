#include "satdpd/volterra.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace satdpd {

KernelIndex KernelIndex::canonical(int order, std::vector<int> indices) {
  if (order < 1 || order % 2 == 0) {
    throw std::invalid_argument("kernel order must be odd and positive");
  }
  if (static_cast<int>(indices.size()) != order) {
    throw std::invalid_argument("kernel index count must equal the order");
  }
  const int m1 = (order + 1) / 2;
  std::sort(indices.begin(), indices.begin() + m1);
  std::sort(indices.begin() + m1, indices.end());
  return KernelIndex{order, std::move(indices)};
}

int KernelIndex::distinct_count() const {
  std::vector<int> v = idx;
  std::sort(v.begin(), v.end());
  return static_cast<int>(std::unique(v.begin(), v.end()) - v.begin());
}

int KernelIndex::min_index() const {
  return *std::min_element(idx.begin(), idx.end());
}

int KernelIndex::max_index() const {
  return *std::max_element(idx.begin(), idx.end());
}

bool KernelIndex::operator<(const KernelIndex& o) const {
  if (order != o.order) return order < o.order;
  return idx < o.idx;
}

VolterraKernels::VolterraKernels(int l1, int l2, int max_order)
    : l1_(l1), l2_(l2), max_order_(max_order) {
  if (l1 < 0 || l2 < 0) throw std::invalid_argument("memory bounds >= 0");
  if (max_order < 1 || max_order % 2 == 0) {
    throw std::invalid_argument("max_order must be odd");
  }
}

void VolterraKernels::check_index(const KernelIndex& k) const {
  if (k.order > max_order_) {
    throw std::invalid_argument("kernel order exceeds max_order");
  }
  if (k.min_index() < -l1_ || k.max_index() > l2_) {
    throw std::invalid_argument("kernel index outside [-l1, l2]");
  }
}

void VolterraKernels::set(int order, std::vector<int> indices, cplx value) {
  KernelIndex k = KernelIndex::canonical(order, std::move(indices));
  check_index(k);
  if (value == cplx(0.0, 0.0)) {
    entries_.erase(k);
  } else {
    entries_[k] = value;
  }
}

void VolterraKernels::add(int order, std::vector<int> indices, cplx value) {
  KernelIndex k = KernelIndex::canonical(order, std::move(indices));
  check_index(k);
  cplx v = entries_[k] + value;
  if (v == cplx(0.0, 0.0)) {
    entries_.erase(k);
  } else {
    entries_[k] = v;
  }
}

cplx VolterraKernels::get(int order, std::vector<int> indices) const {
  KernelIndex k = KernelIndex::canonical(order, std::move(indices));
  auto it = entries_.find(k);
  return it == entries_.end() ? cplx(0.0, 0.0) : it->second;
}

namespace {

inline cplx sample_or_zero(const SymbolBlock& x, long n) {
  if (n < 0 || n >= static_cast<long>(x.size())) return cplx(0.0, 0.0);
  return x[static_cast<std::size_t>(n)];
}

cplx monomial(const SymbolBlock& x, long n, const KernelIndex& k) {
  const int m1 = k.unconjugated_count();
  cplx prod(1.0, 0.0);
  for (int i = 0; i < k.order; ++i) {
    cplx v = sample_or_zero(x, n - k.idx[i]);
    prod *= (i < m1) ? v : std::conj(v);
  }
  return prod;
}

}  // namespace

cplx VolterraKernels::evaluate_at(const SymbolBlock& x, long n) const {
  cplx acc(0.0, 0.0);
  for (const auto& [k, h] : entries_) acc += h * monomial(x, n, k);
  return acc;
}

SymbolBlock VolterraKernels::evaluate(const SymbolBlock& x) const {
  if (x.empty()) throw std::invalid_argument("evaluate: empty block");
  SymbolBlock y(x.size());
  for (long n = 0; n < static_cast<long>(x.size()); ++n) {
    y[n] = evaluate_at(x, n);
  }
  return y;
}

namespace {

void gen_sorted_tuples(int len, int lo, int hi, std::vector<int>& cur,
                       std::vector<std::vector<int>>& out) {
  if (len == 0) {
    out.push_back(cur);
    return;
  }
  int start = cur.empty() ? lo : std::max(lo, cur.back());
  for (int v = start; v <= hi; ++v) {
    cur.push_back(v);
    gen_sorted_tuples(len - 1, lo, hi, cur, out);
    cur.pop_back();
  }
}

std::vector<std::vector<int>> sorted_tuples(int len, int lo, int hi) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  if (len == 0) {
    out.push_back(cur);
    return out;
  }
  gen_sorted_tuples(len, lo, hi, cur, out);
  return out;
}

}  // namespace

std::vector<KernelIndex> enumerate_kernels(int max_order, int l1, int l2) {
  std::vector<KernelIndex> out;
  for (int order = 1; order <= max_order; order += 2) {
    const int m1 = (order + 1) / 2;
    const int m2 = order - m1;
    auto u = sorted_tuples(m1, -l1, l2);
    auto v = sorted_tuples(m2, -l1, l2);
    for (const auto& a : u) {
      for (const auto& b : v) {
        std::vector<int> idx = a;
        idx.insert(idx.end(), b.begin(), b.end());
        out.push_back(KernelIndex{order, std::move(idx)});
      }
    }
  }
  return out;
}

IdentifyResult identify_from_data(const SymbolBlock& x, const SymbolBlock& y,
                                  int max_order, int l1, int l2,
                                  double ridge) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("identify: block size mismatch");
  }
  const std::vector<KernelIndex> cols = enumerate_kernels(max_order, l1, l2);
  const long n = static_cast<long>(x.size());
  const long n0 = l2;
  const long n1 = n - 1 - l1;
  const long rows = n1 - n0 + 1;
  const long ncols = static_cast<long>(cols.size());
  if (rows < 2 * ncols) {
    throw std::invalid_argument(
        "identify: training block too short for the kernel count");
  }

  Eigen::MatrixXcd phi(rows, ncols);
  Eigen::VectorXcd rhs(rows);
  for (long r = 0; r < rows; ++r) {
    const long t = n0 + r;
    for (long c = 0; c < ncols; ++c) phi(r, c) = monomial(x, t, cols[c]);
    rhs(r) = y[static_cast<std::size_t>(t)];
  }

  Eigen::MatrixXcd normal = phi.adjoint() * phi;
  const double mean_diag = normal.diagonal().real().mean();
  const double reg = ridge * mean_diag;
  for (long c = 0; c < ncols; ++c) normal(c, c) += reg;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(normal,
                                                     Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  const double cond = lmax / std::max(lmin, 1e-300);
  if (!(cond < 1e10)) {
    std::ostringstream msg;
    msg << "identify: ill-conditioned normal equations, cond = " << cond
        << " (" << ncols << " kernels, " << rows << " rows)";
    throw std::runtime_error(msg.str());
  }

  Eigen::VectorXcd b = phi.adjoint() * rhs;
  Eigen::VectorXcd h = normal.ldlt().solve(b);

  const double res_power = (phi * h - rhs).squaredNorm();
  const double sig_power = rhs.squaredNorm();

  IdentifyResult out{VolterraKernels(l1, l2, max_order), 0.0, cond, rows,
                     ncols};
  for (long c = 0; c < ncols; ++c) {
    if (h(c) != cplx(0.0, 0.0)) {
      out.kernels.set(cols[c].order, cols[c].idx, h(c));
    }
  }
  out.residual_db = db10(std::max(res_power / sig_power, 1e-30));
  return out;
}

IdentifyResult identify(const ChannelModel& ch, int max_order, int l1, int l2,
                        int n_train, double ridge, std::uint64_t seed) {
  const Constellation c32 = make_apsk32();
  SymbolBlock x = random_symbols(c32, n_train, seed);
  SymbolBlock y = ch.simulate(x);
  // Drop symbols whose outputs see partial filter support.
  const int guard =
      (ch.front().delay + ch.back().delay) / ch.osf() + 2;
  SymbolBlock xi(x.begin() + guard, x.end() - guard);
  SymbolBlock yi(y.begin() + guard, y.end() - guard);
  return identify_from_data(xi, yi, max_order, l1, l2, ridge);
}

VolterraKernels reduce(const VolterraKernels& k, int max_order, int lc_reduced,
                       int max_distinct_indices) {
  if (lc_reduced < 1) throw std::invalid_argument("reduce: lc must be >= 1");
  const int l1r = std::min(k.l1(), (lc_reduced - 1) / 2);
  const int l2r = std::min(k.l2(), lc_reduced / 2);
  const int order = std::min(max_order, k.max_order());
  VolterraKernels out(l1r, l2r, order);
  for (const auto& [ki, h] : k.entries()) {
    if (ki.order > order) continue;
    if (ki.min_index() < -l1r || ki.max_index() > l2r) continue;
    if (ki.distinct_count() > max_distinct_indices) continue;
    out.set(ki.order, ki.idx, h);
  }
  return out;
}

void save_kernels(const VolterraKernels& k, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write kernel file: " + path);
  out << "# window " << k.l1() << " " << k.l2() << " " << k.max_order()
      << "\n";
  char buf[64];
  for (const auto& [ki, h] : k.entries()) {
    out << ki.order;
    for (int i : ki.idx) out << " " << i;
    std::snprintf(buf, sizeof(buf), " %.17g %.17g", h.real(), h.imag());
    out << buf << "\n";
  }
}

VolterraKernels load_kernels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open kernel file: " + path);
  std::string line;
  int l1 = 0, l2 = 0, max_order = 1;
  bool have_window = false;
  struct Row {
    int order;
    std::vector<int> idx;
    cplx h;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string tag;
      if (ls >> tag && tag == "window" && (ls >> l1 >> l2 >> max_order)) {
        have_window = true;
      }
      continue;
    }
    std::istringstream ls(line);
    Row r;
    if (!(ls >> r.order)) {
      throw std::runtime_error("kernel file: bad line: " + line);
    }
    r.idx.resize(r.order);
    for (int i = 0; i < r.order; ++i) {
      if (!(ls >> r.idx[i])) {
        throw std::runtime_error("kernel file: bad indices: " + line);
      }
    }
    double re, im;
    if (!(ls >> re >> im)) {
      throw std::runtime_error("kernel file: bad value: " + line);
    }
    r.h = cplx(re, im);
    rows.push_back(std::move(r));
  }
  if (!have_window) {
    for (const Row& r : rows) {
      for (int i : r.idx) {
        l1 = std::max(l1, -i);
        l2 = std::max(l2, i);
      }
      max_order = std::max(max_order, r.order);
    }
  }
  VolterraKernels k(l1, l2, max_order);
  for (const Row& r : rows) k.add(r.order, r.idx, r.h);
  return k;
}

}  // namespace satdpd
