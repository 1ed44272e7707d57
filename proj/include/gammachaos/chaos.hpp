#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "errors.hpp"
#include "hermite.hpp"
#include "multi_index.hpp"
#include "sym_tensor.hpp"

namespace gammachaos {

inline constexpr int kDefaultMaxOrder = 16;

// Finite chaos expansion c + sum_n I_n(f_n), with I_n realized on Hermite
// products of d standard Gaussian coordinates:
//   I_n(f)(z) = sum_m mult(m) f[m] prod_i He_{a_i(m)}(z_i),
// so that E[I_n(f)^2] = n! ||f||^2.
class ChaosVector {
 public:
  ChaosVector() = default;
  explicit ChaosVector(int dim, double constant = 0.0, int max_order = kDefaultMaxOrder)
      : dim_(dim), max_order_(max_order), c_(constant) {
    require(dim >= 1, "ChaosVector: dimension must be positive");
    require(max_order >= 0, "ChaosVector: negative order budget");
  }

  static ChaosVector from_kernel(const SymTensor& f, int max_order = kDefaultMaxOrder) {
    ChaosVector F(f.dim(), 0.0, std::max(max_order, f.order()));
    F.add_kernel(f);
    return F;
  }

  int dim() const { return dim_; }
  int max_order() const { return max_order_; }
  void set_max_order(int m) {
    require(m >= top_order(), "ChaosVector: budget below current top order");
    max_order_ = m;
  }
  double constant() const { return c_; }
  void set_constant(double c) { c_ = c; }
  const std::map<int, SymTensor>& kernels() const { return k_; }

  const SymTensor* kernel(int n) const {
    auto it = k_.find(n);
    return it == k_.end() ? nullptr : &it->second;
  }

  int top_order() const {
    for (auto it = k_.rbegin(); it != k_.rend(); ++it)
      if (!it->second.empty()) return it->first;
    return 0;
  }

  // The single chaos order, or -1 when the expansion mixes orders or has a constant.
  int pure_order() const {
    int found = -1;
    for (const auto& [n, f] : k_) {
      if (f.empty()) continue;
      if (found != -1) return -1;
      found = n;
    }
    if (c_ != 0.0) return found == -1 ? 0 : -1;
    return found == -1 ? 0 : found;
  }

  void add_kernel(const SymTensor& f) {
    if (f.dim() != dim_) throw ValidationError("ChaosVector: kernel dimension mismatch");
    if (f.order() == 0) {
      c_ += f.get({});
      return;
    }
    if (f.order() > max_order_) throw BudgetError("chaos order " + std::to_string(f.order()) + " exceeds budget " + std::to_string(max_order_));
    auto it = k_.find(f.order());
    if (it == k_.end())
      k_.emplace(f.order(), f);
    else
      it->second += f;
    cleanup();
  }

  SymTensor& kernel_ref(int n) {
    auto it = k_.find(n);
    if (it == k_.end()) it = k_.emplace(n, SymTensor(n, dim_)).first;
    return it->second;
  }

  void cleanup() {
    for (auto it = k_.begin(); it != k_.end();) {
      it->second.prune();
      it = it->second.empty() ? k_.erase(it) : std::next(it);
    }
  }

  ChaosVector& operator+=(const ChaosVector& o) {
    same_dim(o);
    max_order_ = std::max(max_order_, o.max_order_);
    c_ += o.c_;
    for (const auto& [n, f] : o.k_) add_kernel(f);
    return *this;
  }
  ChaosVector& operator*=(double s) {
    c_ *= s;
    for (auto& kv : k_) kv.second *= s;
    cleanup();
    return *this;
  }
  friend ChaosVector operator+(ChaosVector a, const ChaosVector& b) { return a += b; }
  friend ChaosVector operator-(ChaosVector a, const ChaosVector& b) {
    ChaosVector nb = b;
    nb *= -1.0;
    return a += nb;
  }
  friend ChaosVector operator*(double s, ChaosVector a) { return a *= s; }
  friend ChaosVector operator+(ChaosVector a, double c) {
    a.c_ += c;
    return a;
  }

  void same_dim(const ChaosVector& o) const {
    if (o.dim_ != dim_) throw ValidationError("ChaosVector: dimension mismatch");
  }

 private:
  int dim_ = 1;
  int max_order_ = kDefaultMaxOrder;
  double c_ = 0.0;
  std::map<int, SymTensor> k_;
};

// H-valued functional in coordinates: component j is <u, e_j>.
struct ChaosField {
  std::vector<ChaosVector> comp;
  int dim() const { return static_cast<int>(comp.size()); }
};

inline ChaosVector coordinate(int dim, int j, int max_order = kDefaultMaxOrder) {
  return ChaosVector::from_kernel(basis_vector(dim, j), max_order);
}

inline double expectation(const ChaosVector& F) { return F.constant(); }

// E[F G] from orthogonality and the isometry.
inline double expect_product(const ChaosVector& F, const ChaosVector& G) {
  F.same_dim(G);
  double s = F.constant() * G.constant();
  for (const auto& [n, f] : F.kernels())
    if (const SymTensor* g = G.kernel(n)) s += factorial(n) * inner(f, *g);
  return s;
}

inline double variance(const ChaosVector& F) {
  return expect_product(F, F) - F.constant() * F.constant();
}

// Product formula:
//   I_n(f) I_m(g) = sum_r r! C(n,r) C(m,r) I_{n+m-2r}(f ~(x)_r g).
inline ChaosVector multiply(const ChaosVector& F, const ChaosVector& G) {
  F.same_dim(G);
  const int budget = std::max(F.max_order(), G.max_order());
  if (F.top_order() + G.top_order() > budget)
    throw BudgetError("product order " + std::to_string(F.top_order() + G.top_order()) + " exceeds budget " +
                      std::to_string(budget));
  ChaosVector out(F.dim(), F.constant() * G.constant(), budget);
  for (const auto& [n, f] : F.kernels()) out.add_kernel(G.constant() * SymTensor(f));
  for (const auto& [m, g] : G.kernels()) out.add_kernel(F.constant() * SymTensor(g));
  std::map<int, SymTensor> acc;
  double cacc = 0.0;
  for (const auto& [n, f] : F.kernels()) {
    for (const auto& [m, g] : G.kernels()) {
      std::vector<double> coef(std::min(n, m) + 1);
      for (int r = 0; r <= std::min(n, m); ++r) coef[r] = factorial(n) * factorial(m) / factorial(n + m - 2 * r);
      for_each_pairing(f, g, 0, std::min(n, m), [&](int r, const MultiIndex& M, double v) {
        const int N = n + m - 2 * r;
        if (N == 0) {
          cacc += coef[r] * v;
          return;
        }
        auto it = acc.find(N);
        if (it == acc.end()) it = acc.emplace(N, SymTensor(N, F.dim())).first;
        it->second.add(M, coef[r] * v);
      });
    }
  }
  out.set_constant(out.constant() + cacc);
  for (auto& [N, t] : acc) {
    t.prune();
    if (!t.empty()) out.add_kernel(t);
  }
  return out;
}

// z_j * F, using z He_a = He_{a+1} + a He_{a-1}.
inline ChaosVector multiply_coordinate(const ChaosVector& F, int j) {
  if (F.top_order() + 1 > F.max_order()) throw BudgetError("product order exceeds budget");
  const auto lj = static_cast<std::uint16_t>(j);
  ChaosVector out(F.dim(), 0.0, F.max_order());
  if (F.constant() != 0.0) {
    SymTensor e(1, F.dim());
    e.set({lj}, F.constant());
    out.add_kernel(e);
  }
  for (const auto& [n, f] : F.kernels()) {
    SymTensor& up = out.kernel_ref(n + 1);
    for (const auto& [P, v] : f.entries()) {
      const auto a = static_cast<double>(std::count(P.begin(), P.end(), lj));
      up.add(with_label(P, lj), (a + 1.0) / (n + 1.0) * v);
      if (a > 0) {
        MultiIndex Q = P;
        Q.erase(std::find(Q.begin(), Q.end(), lj));
        if (n == 1)
          out.set_constant(out.constant() + v);
        else
          out.kernel_ref(n - 1).add(Q, n * v);
      }
    }
  }
  out.cleanup();
  return out;
}

inline ChaosVector power(const ChaosVector& F, int p) {
  require(p >= 0, "power: negative exponent");
  ChaosVector out(F.dim(), 1.0, F.max_order());
  for (int i = 0; i < p; ++i) out = multiply(out, F);
  return out;
}

// E[F^p]; only F^{ceil(p/2)} is materialized, the rest follows from the isometry.
inline double moment(const ChaosVector& F, int p) {
  require(p >= 1, "moment: exponent must be positive");
  if (p == 1) return expectation(F);
  const int a = (p + 1) / 2, b = p / 2;
  if (F.top_order() * a > F.max_order())
    throw BudgetError("moment of order " + std::to_string(p) + " needs chaos order " +
                      std::to_string(F.top_order() * a) + " beyond budget " + std::to_string(F.max_order()));
  ChaosVector Pb = power(F, b);
  ChaosVector Pa = (a == b) ? Pb : multiply(Pb, F);
  return expect_product(Pa, Pb);
}

// D_j F = sum_n n I_{n-1}(f_n(., j)).
inline ChaosVector malliavin_component(const ChaosVector& F, int j) {
  const auto lj = static_cast<std::uint16_t>(j);
  ChaosVector out(F.dim(), 0.0, F.max_order());
  for (const auto& [n, f] : F.kernels()) {
    for (const auto& [P, v] : f.entries()) {
      auto it = std::find(P.begin(), P.end(), lj);
      if (it == P.end()) continue;
      if (n == 1) {
        out.set_constant(out.constant() + v);
        continue;
      }
      MultiIndex M = P;
      M.erase(M.begin() + (it - P.begin()));
      out.kernel_ref(n - 1).add(M, n * v);
    }
  }
  out.cleanup();
  return out;
}

inline ChaosField malliavin_D(const ChaosVector& F) {
  ChaosField u;
  u.comp.reserve(F.dim());
  for (int j = 0; j < F.dim(); ++j) u.comp.push_back(malliavin_component(F, j));
  return u;
}

// D^S F for a multiset S of directions: slices f_n[M + S] with factor n!/(n-|S|)!.
inline ChaosVector malliavin_derivative(const ChaosVector& F, MultiIndex S) {
  std::sort(S.begin(), S.end());
  const int s = static_cast<int>(S.size());
  if (s == 0) return F;
  ChaosVector out(F.dim(), 0.0, F.max_order());
  for (const auto& [n, f] : F.kernels()) {
    if (n < s) continue;
    const double c = factorial(n) / factorial(n - s);
    for (const auto& [P, v] : f.entries()) {
      if (!std::includes(P.begin(), P.end(), S.begin(), S.end())) continue;
      if (n == s)
        out.set_constant(out.constant() + c * v);
      else
        out.kernel_ref(n - s).add(remove(P, S), c * v);
    }
  }
  out.cleanup();
  return out;
}

// delta(u) = sum_j z_j u_j - D_j u_j
inline ChaosVector divergence(const ChaosField& u) {
  require(u.dim() >= 1, "divergence: empty field");
  const int d = u.comp.front().dim();
  require(u.dim() == d, "divergence: field length must equal the dimension");
  ChaosVector out(d, 0.0, u.comp.front().max_order());
  for (int j = 0; j < d; ++j) {
    out += multiply_coordinate(u.comp[j], j);
    out = out - malliavin_component(u.comp[j], j);
  }
  return out;
}

inline ChaosVector generator_L(const ChaosVector& F) {
  ChaosVector out(F.dim(), 0.0, F.max_order());
  for (const auto& [n, f] : F.kernels()) out.add_kernel(-static_cast<double>(n) * SymTensor(f));
  return out;
}

// Pseudo-inverse; the mean is removed first.
inline ChaosVector inverse_L(const ChaosVector& F) {
  ChaosVector out(F.dim(), 0.0, F.max_order());
  for (const auto& [n, f] : F.kernels()) out.add_kernel((-1.0 / n) * SymTensor(f));
  return out;
}

// Pointwise <u, v>_H.
inline ChaosVector field_inner(const ChaosField& u, const ChaosField& v) {
  require(u.dim() == v.dim() && u.dim() >= 1, "field_inner: size mismatch");
  ChaosVector out(u.comp.front().dim(), 0.0, std::max(u.comp.front().max_order(), v.comp.front().max_order()));
  for (int j = 0; j < u.dim(); ++j) out += multiply(u.comp[j], v.comp[j]);
  return out;
}

inline ChaosField field_sub(const ChaosField& u, const ChaosField& v) {
  require(u.dim() == v.dim(), "field_sub: size mismatch");
  ChaosField w;
  for (int j = 0; j < u.dim(); ++j) w.comp.push_back(u.comp[j] - v.comp[j]);
  return w;
}

inline ChaosField field_scale(const ChaosVector& G, const ChaosField& u) {
  ChaosField w;
  for (const auto& c : u.comp) w.comp.push_back(multiply(G, c));
  return w;
}

// Gamma(F, G) = <DF, DG>
inline ChaosVector carre_du_champ(const ChaosVector& F, const ChaosVector& G) {
  F.same_dim(G);
  ChaosVector out(F.dim(), 0.0, std::max(F.max_order(), G.max_order()));
  for (int j = 0; j < F.dim(); ++j) {
    ChaosVector a = malliavin_component(F, j);
    if (a.kernels().empty() && a.constant() == 0.0) continue;
    ChaosVector b = malliavin_component(G, j);
    if (b.kernels().empty() && b.constant() == 0.0) continue;
    out += multiply(a, b);
  }
  return out;
}

inline bool approx_equal(const ChaosVector& F, const ChaosVector& G, double tol) {
  ChaosVector D = F - G;
  if (std::abs(D.constant()) > tol) return false;
  for (const auto& [n, f] : D.kernels())
    for (const auto& [m, v] : f.entries())
      if (std::abs(v) > tol) return false;
  return true;
}

// Hermite values He_k(z_i), k <= maxdeg, for one sample point.
class HermiteTable {
 public:
  HermiteTable(int dim, int maxdeg) : dim_(dim), w_(maxdeg + 1), v_(static_cast<std::size_t>(dim) * (maxdeg + 1)) {}
  void fill(const double* z) {
    for (int i = 0; i < dim_; ++i) hermite_table(z[i], w_ - 1, &v_[static_cast<std::size_t>(i) * w_]);
  }
  double operator()(int i, int k) const { return v_[static_cast<std::size_t>(i) * w_ + k]; }
  int dim() const { return dim_; }
  int maxdeg() const { return w_ - 1; }

 private:
  int dim_, w_;
  std::vector<double> v_;
};

// Flattened sample-path evaluator.
class CompiledChaos {
 public:
  CompiledChaos() = default;
  explicit CompiledChaos(const ChaosVector& F) : dim_(F.dim()), c_(F.constant()) {
    for (const auto& [n, f] : F.kernels()) {
      maxdeg_ = std::max(maxdeg_, n);
      for (const auto& [m, v] : f.entries()) {
        coef_.push_back(multiplicity(m) * v);
        for (const auto& r : runs(m)) fac_.push_back({r.label, static_cast<std::uint16_t>(r.count)});
        end_.push_back(static_cast<std::uint32_t>(fac_.size()));
      }
    }
  }
  int dim() const { return dim_; }
  int maxdeg() const { return maxdeg_; }
  std::size_t terms() const { return coef_.size(); }

  double operator()(const HermiteTable& he) const {
    double s = c_;
    std::uint32_t b = 0;
    for (std::size_t t = 0; t < coef_.size(); ++t) {
      double p = coef_[t];
      for (std::uint32_t i = b; i < end_[t]; ++i) p *= he(fac_[i].first, fac_[i].second);
      b = end_[t];
      s += p;
    }
    return s;
  }

 private:
  int dim_ = 1, maxdeg_ = 0;
  double c_ = 0.0;
  std::vector<double> coef_;
  std::vector<std::pair<std::uint16_t, std::uint16_t>> fac_;
  std::vector<std::uint32_t> end_;
};

inline double eval(const ChaosVector& F, const std::vector<double>& z) {
  require(static_cast<int>(z.size()) == F.dim(), "eval: point dimension mismatch");
  CompiledChaos C(F);
  HermiteTable he(F.dim(), std::max(1, C.maxdeg()));
  he.fill(z.data());
  return C(he);
}

// Value and all partial derivatives up to order k at one point, keyed by the
// sorted multiset of differentiation directions (empty key = value).
struct Jet {
  int dim = 1;
  int order = 0;
  std::map<MultiIndex, double> d;

  double at(MultiIndex S) const {
    std::sort(S.begin(), S.end());
    auto it = d.find(S);
    return it == d.end() ? 0.0 : it->second;
  }
  double value() const { return at({}); }
  std::vector<double> gradient() const {
    std::vector<double> g(dim);
    for (int i = 0; i < dim; ++i) g[i] = at({static_cast<std::uint16_t>(i)});
    return g;
  }
  std::vector<double> hessian() const {
    std::vector<double> h(static_cast<std::size_t>(dim) * dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) h[i * dim + j] = at({static_cast<std::uint16_t>(i), static_cast<std::uint16_t>(j)});
    return h;
  }
};

// Derivatives straight from He_a' = a He_{a-1}.
inline Jet eval_jet(const ChaosVector& F, const std::vector<double>& z, int k) {
  require(k >= 0 && k <= 4, "eval_jet: derivative order must be in [0, 4]");
  require(static_cast<int>(z.size()) == F.dim(), "eval_jet: point dimension mismatch");
  Jet jet;
  jet.dim = F.dim();
  jet.order = k;
  HermiteTable he(F.dim(), std::max(1, F.top_order()));
  he.fill(z.data());
  jet.d[{}] = F.constant();
  for (const auto& [n, f] : F.kernels()) {
    for (const auto& [m, v] : f.entries()) {
      const double c = multiplicity(m) * v;
      for_each_submultiset(m, [&](const MultiIndex& S, const MultiIndex&) {
        if (static_cast<int>(S.size()) > k) return;
        double p = c;
        auto rm = runs(m), rs = runs(S);
        std::size_t b = 0;
        for (const auto& r : rm) {
          int s = 0;
          if (b < rs.size() && rs[b].label == r.label) s = rs[b++].count;
          p *= factorial(r.count) / factorial(r.count - s) * he(r.label, r.count - s);
        }
        jet.d[S] += p;
      });
    }
  }
  return jet;
}

}  // namespace gammachaos
