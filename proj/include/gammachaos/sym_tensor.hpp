#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "errors.hpp"
#include "multi_index.hpp"

namespace gammachaos {

// Symmetric order-q tensor over R^d stored by sorted representative.
// The value at key m is the full-tensor coordinate f[i_1..i_q] for any
// ordering of m; absent keys are zero.
class SymTensor {
 public:
  SymTensor() = default;
  SymTensor(int order, int dim) : order_(order), dim_(dim) {
    require(order >= 0, "SymTensor: negative order");
    require(dim >= 1, "SymTensor: dimension must be positive");
  }

  int order() const { return order_; }
  int dim() const { return dim_; }
  const std::map<MultiIndex, double>& entries() const { return e_; }
  bool empty() const { return e_.empty(); }
  std::size_t size() const { return e_.size(); }

  double get(MultiIndex m) const {
    std::sort(m.begin(), m.end());
    auto it = e_.find(m);
    return it == e_.end() ? 0.0 : it->second;
  }

  void set(MultiIndex m, double v) {
    check_key(m);
    std::sort(m.begin(), m.end());
    if (v == 0.0)
      e_.erase(m);
    else
      e_[std::move(m)] = v;
  }

  void add(const MultiIndex& sorted_key, double v) {
    if (v != 0.0) e_[sorted_key] += v;
  }

  void prune() {
    for (auto it = e_.begin(); it != e_.end();)
      it = (it->second == 0.0) ? e_.erase(it) : std::next(it);
  }

  // ||f||^2 = sum_m mult(m) f[m]^2
  double norm2() const {
    double s = 0.0;
    for (const auto& [m, v] : e_) s += multiplicity(m) * v * v;
    return s;
  }

  SymTensor& operator+=(const SymTensor& o) {
    same_shape(o);
    for (const auto& [m, v] : o.e_) e_[m] += v;
    prune();
    return *this;
  }
  SymTensor& operator*=(double s) {
    if (s == 0.0) e_.clear();
    for (auto& kv : e_) kv.second *= s;
    return *this;
  }
  friend SymTensor operator+(SymTensor a, const SymTensor& b) { return a += b; }
  friend SymTensor operator-(SymTensor a, const SymTensor& b) {
    SymTensor nb = b;
    nb *= -1.0;
    return a += nb;
  }
  friend SymTensor operator*(double s, SymTensor a) { return a *= s; }

  void same_shape(const SymTensor& o) const {
    if (o.order_ != order_ || o.dim_ != dim_) throw ValidationError("SymTensor: order/dimension mismatch");
  }

 private:
  void check_key(const MultiIndex& m) const {
    if (static_cast<int>(m.size()) != order_) throw ValidationError("SymTensor: key length differs from order");
    for (auto v : m)
      if (v >= dim_) throw ValidationError("SymTensor: index out of range");
  }

  int order_ = 0;
  int dim_ = 1;
  std::map<MultiIndex, double> e_;
};

// <f, g> in the full tensor space.
inline double inner(const SymTensor& f, const SymTensor& g) {
  f.same_shape(g);
  double s = 0.0;
  const auto& small = f.size() <= g.size() ? f.entries() : g.entries();
  const auto& large = f.size() <= g.size() ? g.entries() : f.entries();
  for (const auto& [m, v] : small) {
    auto it = large.find(m);
    if (it != large.end()) s += multiplicity(m) * v * it->second;
  }
  return s;
}

inline SymTensor diagonal_tensor(const std::vector<double>& zeta, int order = 2) {
  SymTensor t(order, static_cast<int>(zeta.size()));
  for (std::size_t i = 0; i < zeta.size(); ++i) t.set(MultiIndex(order, static_cast<std::uint16_t>(i)), zeta[i]);
  return t;
}

inline SymTensor basis_vector(int dim, int j) {
  SymTensor t(1, dim);
  t.set({static_cast<std::uint16_t>(j)}, 1.0);
  return t;
}

template <class Rng>
SymTensor random_sym_tensor(int order, int dim, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  SymTensor t(order, dim);
  for_each_multiset(dim, order, [&](const MultiIndex& m) { t.set(m, nd(rng)); });
  return t;
}

// Walks every (P, Q, K) with P in keys(f), Q in keys(g), K a common sub-multiset
// of size r in [rmin, rmax]. Calls fn(r, M, ratio) with M = (P-K)+(Q-K) and
// ratio = M!/((P-K)! (Q-K)! K!), count factorials.
template <class Fn>
void for_each_pairing(const SymTensor& f, const SymTensor& g, int rmin, int rmax, Fn&& fn) {
  struct Lab {
    std::uint16_t label;
    int p, q;
  };
  std::vector<Lab> labs;
  std::vector<int> k, common;
  MultiIndex M;
  for (const auto& [P, fv] : f.entries()) {
    for (const auto& [Q, gv] : g.entries()) {
      labs.clear();
      std::size_t i = 0, j = 0;
      while (i < P.size() || j < Q.size()) {
        std::uint16_t l = (j >= Q.size() || (i < P.size() && P[i] <= Q[j])) ? P[i] : Q[j];
        int p = 0, q = 0;
        while (i < P.size() && P[i] == l) ++p, ++i;
        while (j < Q.size() && Q[j] == l) ++q, ++j;
        labs.push_back({l, p, q});
      }
      common.clear();
      for (std::size_t a = 0; a < labs.size(); ++a)
        if (labs[a].p > 0 && labs[a].q > 0) common.push_back(static_cast<int>(a));
      k.assign(labs.size(), 0);
      const double w = fv * gv;
      while (true) {
        int r = 0;
        for (int a : common) r += k[a];
        if (r >= rmin && r <= rmax) {
          M.clear();
          double ratio = 1.0;
          for (std::size_t a = 0; a < labs.size(); ++a) {
            int c = labs[a].p + labs[a].q - 2 * k[a];
            M.insert(M.end(), c, labs[a].label);
            ratio *= factorial(c) / (factorial(labs[a].p - k[a]) * factorial(labs[a].q - k[a]) * factorial(k[a]));
          }
          fn(r, M, ratio * w);
        }
        std::size_t c = 0;
        while (c < common.size()) {
          int a = common[c];
          if (k[a] < std::min(labs[a].p, labs[a].q)) {
            ++k[a];
            break;
          }
          k[a] = 0;
          ++c;
        }
        if (c == common.size()) break;
      }
    }
  }
}

// Symmetrized r-th contraction computed directly in multiset form.
inline SymTensor sym_contract(const SymTensor& f, const SymTensor& g, int r) {
  if (f.dim() != g.dim()) throw ValidationError("contract: dimension mismatch");
  if (r < 0 || r > std::min(f.order(), g.order())) throw ValidationError("contract: invalid contraction order");
  const int n = f.order(), m = g.order(), N = n + m - 2 * r;
  const double c = factorial(n - r) * factorial(m - r) * factorial(r) / factorial(N);
  SymTensor out(N, f.dim());
  for_each_pairing(f, g, r, r, [&](int, const MultiIndex& M, double v) { out.add(M, c * v); });
  out.prune();
  return out;
}

// Dense row-major tensor (index i_1 varies slowest).
struct DenseTensor {
  int order = 0;
  int dim = 1;
  std::vector<double> data;

  DenseTensor() : data(1, 0.0) {}
  DenseTensor(int order_, int dim_) : order(order_), dim(dim_) {
    std::size_t n = 1;
    for (int i = 0; i < order; ++i) n *= static_cast<std::size_t>(dim);
    data.assign(n, 0.0);
  }
  std::size_t flat(const std::vector<int>& idx) const {
    std::size_t f = 0;
    for (int v : idx) f = f * dim + v;
    return f;
  }
  std::vector<int> unflat(std::size_t f) const {
    std::vector<int> idx(order);
    for (int i = order - 1; i >= 0; --i) {
      idx[i] = static_cast<int>(f % dim);
      f /= dim;
    }
    return idx;
  }
  double norm2() const {
    double s = 0.0;
    for (double v : data) s += v * v;
    return s;
  }
};

inline DenseTensor to_dense(const SymTensor& f) {
  DenseTensor t(f.order(), f.dim());
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    auto idx = t.unflat(i);
    MultiIndex m(idx.begin(), idx.end());
    t.data[i] = f.get(m);
  }
  return t;
}

// (f (x)_r g)(x, y) = sum_t f(x, t) g(y, t): the last r axes of each are paired.
inline DenseTensor contract(const DenseTensor& f, const DenseTensor& g, int r) {
  if (f.dim != g.dim) throw ValidationError("contract: dimension mismatch");
  if (r < 0 || r > std::min(f.order, g.order)) throw ValidationError("contract: invalid contraction order");
  const std::size_t inner_n = DenseTensor(r, f.dim).data.size();
  const std::size_t rows = f.data.size() / inner_n, cols = g.data.size() / inner_n;
  DenseTensor out(f.order + g.order - 2 * r, f.dim);
  for (std::size_t a = 0; a < rows; ++a)
    for (std::size_t b = 0; b < cols; ++b) {
      double s = 0.0;
      for (std::size_t t = 0; t < inner_n; ++t) s += f.data[a * inner_n + t] * g.data[b * inner_n + t];
      out.data[a * cols + b] = s;
    }
  return out;
}

inline DenseTensor contract(const SymTensor& f, const SymTensor& g, int r) {
  return contract(to_dense(f), to_dense(g), r);
}

// Average over all orderings of the listed axes, other axes fixed.
inline DenseTensor symmetrize_axes(const DenseTensor& t, std::vector<int> axes) {
  std::sort(axes.begin(), axes.end());
  DenseTensor out(t.order, t.dim);
  std::vector<std::size_t> stride(t.order, 1);
  for (int i = t.order - 2; i >= 0; --i) stride[i] = stride[i + 1] * static_cast<std::size_t>(t.dim);
  std::vector<std::vector<int>> perms;
  std::vector<int> perm(axes.size());
  std::iota(perm.begin(), perm.end(), 0);
  do perms.push_back(perm);
  while (std::next_permutation(perm.begin(), perm.end()));
  const double inv = 1.0 / static_cast<double>(perms.size());
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const auto idx = out.unflat(i);
    std::size_t base = i;
    for (int a : axes) base -= idx[a] * stride[a];
    double s = 0.0;
    for (const auto& p : perms) {
      std::size_t f = base;
      for (std::size_t a = 0; a < axes.size(); ++a) f += idx[axes[p[a]]] * stride[axes[a]];
      s += t.data[f];
    }
    out.data[i] = s * inv;
  }
  return out;
}

// Full symmetrization, returned in multiset storage.
inline SymTensor symmetrize(const DenseTensor& t) {
  SymTensor out(t.order, t.dim);
  for_each_multiset(t.dim, t.order, [&](const MultiIndex& m) {
    MultiIndex p = m;
    double s = 0.0, n = 0.0;
    do {
      s += t.data[t.flat(std::vector<int>(p.begin(), p.end()))];
      n += 1.0;
    } while (std::next_permutation(p.begin(), p.end()));
    out.set(m, s / n);
  });
  return out;
}

}  // namespace gammachaos
