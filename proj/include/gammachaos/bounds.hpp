#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chaos.hpp"
#include "errors.hpp"
#include "gamma_target.hpp"
#include "monte_carlo.hpp"
#include "simulate.hpp"
#include "stein.hpp"
#include "sym_tensor.hpp"

namespace gammachaos {

// ---------------------------------------------------------------- constants

inline void require_even_order(int q, const char* who) {
  if (q < 2 || q % 2 != 0)
    throw PreconditionError(std::string(who) +
                            ": only even chaos orders q >= 2 are supported (the contraction estimates are unproven "
                            "for odd q)");
}

// lambda(l, m); symmetric in (l, m).
inline double lambda_const(int l, int m, int q) {
  require_even_order(q, "lambda_const");
  if (l < m) std::swap(l, m);
  require(m >= 1 && l <= q / 2 + 1 && l + m >= 3, "lambda_const: need 1 <= m <= l <= q/2 + 1 and l + m >= 3");
  const int h = q / 2;
  return factorial(q - 1) * factorial(h - l + 1) * factorial(h - m + 1) /
         (factorial(q - l - m + 2) * factorial(h) * factorial(h));
}

inline double tau_const(int k, int l, int r, int q) {
  require_even_order(q, "tau_const");
  require(l >= 1 && l <= k && k <= q / 2 + 1 && k + l >= 3, "tau_const: need 1 <= l <= k <= q/2 + 1, k + l >= 3");
  require(r >= 0 && r <= q - k, "tau_const: need 0 <= r <= q - k");
  const double fq = factorial(q);
  return fq * fq / (factorial(q - l) * factorial(q - k)) * factorial(r) * binom(q - k, r) * binom(q - l, r);
}

// Coefficient of f (x)~_{q/2} f inside h = c f (x)~_{q/2} f - f.
inline double half_contraction_coeff(int q) {
  const double b = binom(q - 1, q / 2 - 1);
  return q * factorial(q / 2 - 1) * b * b;
}

namespace detail {

inline const SymTensor& pure_kernel(const ChaosVector& F, int* q_out) {
  const int q = F.pure_order();
  if (q <= 0) throw ValidationError("expected a centred variable in a single chaos");
  *q_out = q;
  return *F.kernel(q);
}

inline void require_alpha_match(double alpha, double var, const char* who) {
  if (std::abs(alpha - var) > 1e-9 * std::max(1.0, std::abs(var)))
    throw PreconditionError(std::string(who) + ": alpha must equal E[F^2] = " + std::to_string(var));
}

inline SymTensor h_kernel(const SymTensor& f) {
  const int q = f.order();
  SymTensor h = sym_contract(f, f, q / 2);
  h *= half_contraction_coeff(q);
  return h - f;
}

inline std::vector<double> sym_contraction_norms(const SymTensor& f) {
  const int q = f.order();
  std::vector<double> n(q - 1, 0.0);
  for (int r = 0; r <= q - 2; ++r)
    if (r != q / 2 - 1) n[r] = sym_contract(f, f, r + 1).norm2();
  return n;
}

}  // namespace detail

// ---------------------------------------------------------------- Theta

inline ChaosVector theta(const ChaosVector& F, double alpha) {
  int q = 0;
  detail::pure_kernel(F, &q);
  ChaosVector T = carre_du_champ(F, F);
  T = T - static_cast<double>(q) * (F + alpha);
  return T;
}

// ---------------------------------------------------------------- contraction expansions

// E[Theta^2] written through contractions; requires alpha = q! ||f||^2.
inline double lemma51_rhs(const SymTensor& f, double alpha) {
  const int q = f.order();
  require_even_order(q, "lemma51_rhs");
  detail::require_alpha_match(alpha, factorial(q) * f.norm2(), "lemma51_rhs");
  const auto n = detail::sym_contraction_norms(f);
  const double q4 = std::pow(q, 4);
  double s = 0.0;
  for (int r = 0; r <= q - 2; ++r) {
    if (r == q / 2 - 1) continue;
    const double b = binom(q - 1, r), fr = factorial(r);
    s += q4 * fr * fr * b * b * b * b * factorial(2 * q - 2 - 2 * r) * n[r];
  }
  return s + factorial(q - 1) * std::pow(q, 3) * detail::h_kernel(f).norm2();
}

// E || 2 D^2F (x)_1 DF - q DF ||^2 through contractions.
inline double lemma52_rhs(const SymTensor& f) {
  const int q = f.order();
  require_even_order(q, "lemma52_rhs");
  const auto n = detail::sym_contraction_norms(f);
  const double q4 = std::pow(q, 4);
  double s = 0.0;
  for (int r = 0; r <= q - 2; ++r) {
    if (r == q / 2 - 1) continue;
    const double b = binom(q - 1, r), fr = factorial(r), ratio = double(q - r - 1) / (q - 1);
    s += 4 * q4 * (q - 1) * (q - 1) * fr * fr * ratio * ratio * b * b * b * b * factorial(2 * q - 3 - 2 * r) * n[r];
  }
  return s + factorial(q - 1) * q4 * detail::h_kernel(f).norm2();
}

inline double lemma52_direct(const SymTensor& f) {
  const int q = f.order();
  require_even_order(q, "lemma52_direct");
  const ChaosVector F = ChaosVector::from_kernel(f);
  const ChaosField DF = malliavin_D(F);
  double s = 0.0;
  for (int i = 0; i < F.dim(); ++i) {
    ChaosVector v = -static_cast<double>(q) * DF.comp[i];
    for (int m = 0; m < F.dim(); ++m) {
      const MultiIndex S{static_cast<std::uint16_t>(std::min(i, m)), static_cast<std::uint16_t>(std::max(i, m))};
      v += 2.0 * multiply(malliavin_derivative(F, S), DF.comp[m]);
    }
    s += expect_product(v, v);
  }
  return s;
}

// Largest ratio between matching coefficients of the two expansions above.
inline double c1_constant(int q) {
  require_even_order(q, "c1_constant");
  double c = q;  // h-term ratio q^4 (q-1)! / (q^3 (q-1)!)
  for (int r = 0; r <= q - 2; ++r)
    if (r != q / 2 - 1) c = std::max(c, 2.0 * (q - r - 1));
  return c;
}

// ---------------------------------------------------------------- Lambda(k, l)

// Lambda(k,l) = lambda D^kF (x)_1 D^lF - D^{k+l-2}F. Component (A, B) holds the
// entry at an ordered tuple whose first k-1 indices sort to A and last l-1 to
// B; weight(A, B) counts those tuples. The field is symmetric within each
// block, not across blocks, hence the pair indexing.
struct LambdaField {
  int k = 0, l = 0, q = 0;
  std::vector<MultiIndex> A, B;
  std::vector<ChaosVector> comp;  // row-major over (A, B)
  std::vector<double> weight;

  const ChaosVector& at(std::size_t a, std::size_t b) const { return comp[a * B.size() + b]; }
  double expected_norm2() const {
    double s = 0.0;
    for (std::size_t i = 0; i < comp.size(); ++i) s += weight[i] * expect_product(comp[i], comp[i]);
    return s;
  }
};

inline LambdaField lambda_field(const ChaosVector& F, int k, int l) {
  int q = 0;
  detail::pure_kernel(F, &q);
  require_even_order(q, "lambda_field");
  require(l >= 1 && l <= k && k <= q / 2 + 1 && k + l >= 3, "lambda_field: need 1 <= l <= k <= q/2 + 1, k + l >= 3");
  LambdaField L;
  L.k = k;
  L.l = l;
  L.q = q;
  const int d = F.dim();
  for_each_multiset(d, k - 1, [&](const MultiIndex& m) { L.A.push_back(m); });
  for_each_multiset(d, l - 1, [&](const MultiIndex& m) { L.B.push_back(m); });
  const double lam = lambda_const(k, l, q);
  std::map<MultiIndex, ChaosVector> cache;
  auto deriv = [&](MultiIndex S) -> const ChaosVector& {
    std::sort(S.begin(), S.end());
    auto it = cache.find(S);
    if (it == cache.end()) it = cache.emplace(S, malliavin_derivative(F, S)).first;
    return it->second;
  };
  for (const auto& a : L.A)
    for (const auto& b : L.B) {
      ChaosVector c = -1.0 * deriv(merge(a, b));
      for (int m = 0; m < d; ++m) {
        const ChaosVector& x = deriv(with_label(a, static_cast<std::uint16_t>(m)));
        if (x.kernels().empty() && x.constant() == 0.0) continue;
        const ChaosVector& y = deriv(with_label(b, static_cast<std::uint16_t>(m)));
        if (y.kernels().empty() && y.constant() == 0.0) continue;
        c += lam * multiply(x, y);
      }
      c.cleanup();
      L.comp.push_back(std::move(c));
      L.weight.push_back(multiplicity(a) * multiplicity(b));
    }
  return L;
}

inline double lemma54_direct(const SymTensor& f, int k, int l) {
  return lambda_field(ChaosVector::from_kernel(f), k, l).expected_norm2();
}

// The displayed expansion: lambda^2 sum tau^2 (2q-k-l-2r)! ||f (x)~_{r+1} f||^2
// + q!^2/(q-k-l+2)! ||h||^2. Exact for (k,l) = (2,1); below the true value
// otherwise (see lemma54_expansion).
inline double lemma54_rhs(const SymTensor& f, int k, int l) {
  const int q = f.order();
  require_even_order(q, "lemma54_rhs");
  const double lam = lambda_const(k, l, q);
  double s = 0.0;
  for (int r = 0; r <= q - k; ++r) {
    if (r == q / 2 - 1) continue;
    const double t = tau_const(k, l, r, q);
    s += lam * lam * t * t * factorial(2 * q - k - l - 2 * r) * sym_contract(f, f, r + 1).norm2();
  }
  const double fq = factorial(q);
  return s + fq * fq / factorial(q - k - l + 2) * detail::h_kernel(f).norm2();
}

// Exact contraction expansion of E||Lambda(k,l)||^2. The chaos kernels of
// D^kF (x)_1 D^lF are symmetric only in the integrated variables, so the
// norms are of partially symmetrised contractions g_r with axes
// [I(k-1), X(q-k-r), J(l-1), Y(q-l-r)], symmetrised over X u Y.
inline double lemma54_expansion(const SymTensor& f, int k, int l) {
  const int q = f.order();
  require_even_order(q, "lemma54_expansion");
  const double lam = lambda_const(k, l, q);
  const DenseTensor fd = to_dense(f);
  double s = 0.0;
  for (int r = 0; r <= q - k; ++r) {
    const DenseTensor g = contract(fd, fd, r + 1);
    const int half = q - r - 1;
    std::vector<int> axes;
    for (int a = k - 1; a < half; ++a) axes.push_back(a);
    for (int a = half + l - 1; a < 2 * half; ++a) axes.push_back(a);
    const DenseTensor pg = axes.size() > 1 ? symmetrize_axes(g, axes) : g;
    const double t = tau_const(k, l, r, q);
    const int p = 2 * q - k - l - 2 * r;
    if (r == q / 2 - 1) {
      const double c = factorial(q) / factorial(p);
      double n = 0.0;
      for (std::size_t i = 0; i < pg.data.size(); ++i) {
        const double v = lam * t * pg.data[i] - c * fd.data[i];
        n += v * v;
      }
      s += factorial(p) * n;
    } else {
      s += lam * lam * t * t * factorial(p) * pg.norm2();
    }
  }
  return s;
}

// Largest ratio of matching coefficients between lemma54_rhs and lemma51_rhs.
// Since lemma54_rhs undershoots the true norm for (k,l) != (2,1) this constant
// is not a proven bound there; callers verify domination empirically.
inline double c_constant(int q, int k, int l) {
  require_even_order(q, "c_constant");
  const double lam = lambda_const(k, l, q);
  const double fq = factorial(q);
  double c = fq * fq / factorial(q - k - l + 2) / (factorial(q - 1) * std::pow(q, 3));
  for (int r = 0; r <= q - k; ++r) {
    if (r == q / 2 - 1) continue;
    const double t = tau_const(k, l, r, q), b = binom(q - 1, r), fr = factorial(r);
    const double num = lam * lam * t * t * factorial(2 * q - k - l - 2 * r);
    const double den = std::pow(q, 4) * fr * fr * b * b * b * b * factorial(2 * q - 2 - 2 * r);
    c = std::max(c, num / den);
  }
  return c;
}

// D Theta = q Lambda(2, 1), checked coefficient-wise.
inline bool dtheta_identity_check(const SymTensor& f, double tol = 1e-10) {
  require_even_order(f.order(), "dtheta_identity_check");
  const ChaosVector F = ChaosVector::from_kernel(f);
  const double alpha = factorial(f.order()) * f.norm2();
  const ChaosVector T = theta(F, alpha);
  const LambdaField L = lambda_field(F, 2, 1);
  double scale = 1.0;
  for (const auto& [n, t] : T.kernels())
    for (const auto& [m, v] : t.entries()) scale = std::max(scale, std::abs(v));
  for (int j = 0; j < F.dim(); ++j)
    if (!approx_equal(malliavin_component(T, j), static_cast<double>(f.order()) * L.at(j, 0), tol * scale))
      return false;
  return true;
}

// E F^4 - 6 E F^3 + 6(1 - alpha) alpha + 3 alpha^2, from exact moments.
inline double fourth_moment_combo(const ChaosVector& F, double alpha) {
  const double var = variance(F);
  if (std::abs(F.constant()) > 1e-9 * std::max(1.0, var))
    throw PreconditionError("fourth_moment_combo: F must be centred");
  detail::require_alpha_match(alpha, var, "fourth_moment_combo");
  return moment(F, 4) - 6 * moment(F, 3) + 6 * (1 - alpha) * alpha + 3 * alpha * alpha;
}

// ---------------------------------------------------------------- negative-moment precheck

// Second chaos: F + alpha = c + sum zeta_i xi_i^2 with xi iid N(0,1),
// c = alpha - sum zeta_i. Negative moments of order 2 theta exist iff more
// than 2 theta of the zeta are positive (with c >= 0, zeta > 0).
struct NegativeMomentCheck {
  bool second_chaos = false;
  bool ok = true;
  std::vector<double> zeta;  // descending
  int positive = 0;
  int required = 0;
  std::string reason;
  std::vector<std::string> warnings;
};

inline NegativeMomentCheck negative_moment_precheck(const ChaosVector& F, double alpha, int min_positive = 9) {
  NegativeMomentCheck c;
  c.required = min_positive;
  const int q = F.pure_order();
  if (q != 2) {
    c.warnings.push_back(
        "negative-moment existence cannot be certified outside the second chaos; Monte Carlo estimates may be "
        "unreliable");
    return c;
  }
  c.second_chaos = true;
  const SymTensor& f = *F.kernel(2);
  const int d = F.dim();
  Eigen::MatrixXd M(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      M(i, j) = f.get({static_cast<std::uint16_t>(std::min(i, j)), static_cast<std::uint16_t>(std::max(i, j))});
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = es.eigenvalues();
  double top = 0.0;
  for (int i = 0; i < d; ++i) top = std::max(top, std::abs(ev(i)));
  const double tol = 1e-12 * std::max(1.0, top);
  double sum = 0.0;
  for (int i = d - 1; i >= 0; --i) {
    const double z = ev(i);
    if (z < -tol) {
      c.ok = false;
      c.reason = "second-chaos coefficient " + std::to_string(z) + " is negative; F + alpha is unbounded below";
    }
    if (z > tol) {
      c.zeta.push_back(z);
      sum += z;
    }
  }
  c.positive = static_cast<int>(c.zeta.size());
  if (c.ok && alpha < sum - 1e-9 * std::max(1.0, sum)) {
    c.ok = false;
    c.reason = "alpha = " + std::to_string(alpha) + " is below the coefficient sum " + std::to_string(sum);
  }
  if (c.ok && c.positive < min_positive) {
    c.ok = false;
    c.reason = "only " + std::to_string(c.positive) + " positive second-chaos coefficients; at least " +
               std::to_string(min_positive) + " are needed for the negative moments to exist";
  }
  return c;
}

// ---------------------------------------------------------------- moment menu

// Monte Carlo estimates of |Y|^a W^b G^c with Y = F + alpha and W, G optional
// non-negative chaos variables (powers of zero-valued variables are 0^0 = 1).
struct MomentRequest {
  std::string label;
  double y = 0.0, w = 0.0, g = 0.0;
};

inline std::vector<McEstimate> moment_menu(const ChaosVector& F, double alpha, const ChaosVector* W,
                                           const ChaosVector* G, const std::vector<MomentRequest>& req,
                                           const McConfig& cfg) {
  require(!req.empty(), "moment_menu: nothing requested");
  const CompiledChaos cf(F);
  const CompiledChaos cw = W ? CompiledChaos(*W) : CompiledChaos(ChaosVector(F.dim(), 1.0));
  const CompiledChaos cg = G ? CompiledChaos(*G) : CompiledChaos(ChaosVector(F.dim(), 1.0));
  const int deg = std::max({1, cf.maxdeg(), cw.maxdeg(), cg.maxdeg()});
  return run_mc(cfg, req.size(), [&] {
    return [&, he = HermiteTable(F.dim(), deg), z = std::vector<double>(F.dim())](Stream& s, double* o) mutable {
      for (auto& v : z) v = s.normal();
      he.fill(z.data());
      const double Y = std::abs(cf(he) + alpha), w = cw(he), g = cg(he);
      for (std::size_t i = 0; i < req.size(); ++i) {
        const auto& r = req[i];
        double v = 1.0;
        if (r.y != 0.0) v *= std::pow(Y, r.y);
        if (r.w != 0.0) v *= std::pow(w, r.w);
        if (r.g != 0.0) v *= std::pow(g, r.g);
        o[i] = v;
      }
      return true;
    };
  });
}

// ---------------------------------------------------------------- reports

struct BoundPoint {
  double x = 0.0;
  SteinEnvelope env;
  double stein_factor = 0.0;  // envelope moments, multiplies the radical
  double P = 0.0;             // full prefactor
  double bound = 0.0;
};

struct BoundReport {
  std::string theorem;  // "1.1", "1.2", "6.1"
  double alpha = 0.0;
  int q = 0;  // 0 for mixed chaos
  int k = 0;
  double fourth_moment_combo = 0.0;
  double theta_var = 0.0;
  double radical = 0.0;  // sqrt(q^2/3 combo), or R_s for the general bound
  double C1 = 0.0;
  std::map<std::string, McEstimate> negative_moments;
  std::map<std::string, double> exact_moments;
  std::vector<BoundPoint> points;
  std::vector<std::string> warnings;
  // general bound only
  int s = 0;
  double p_exp = 0.0, r_exp = 0.0;
  double R_s = 0.0, R_3 = 0.0;

  double bound_at(double x) const {
    for (const auto& p : points)
      if (p.x == x) return p.bound;
    throw ValidationError("bound report: no entry for x = " + std::to_string(x));
  }
};

namespace detail {

inline std::string pow_label(const std::string& base, double p) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s^%.6g", base.c_str(), p);
  return buf;
}

// |Y| powers required by the envelope shapes at the requested points.
inline std::vector<double> envelope_powers(double alpha, int k, const std::vector<double>& xs) {
  std::vector<double> pw;
  auto add = [&](double p) {
    if (std::find(pw.begin(), pw.end(), p) == pw.end()) pw.push_back(p);
  };
  const int top = static_cast<int>(std::ceil(alpha)) - 1;
  for (double x : xs) {
    if (x > 0) {
      for (int i = 1; i <= top; ++i) add(2 * (alpha - i));
      add(-2.0);
    } else if (x < 0) {
      for (int i = 0; i <= top; ++i) add(2 * (alpha - i));
    } else {
      for (int p = 1; p <= k + 2; ++p) add(-2.0 * p);
    }
  }
  return pw;
}

// E|Y|^p: exact for non-negative even integer p when the engine budget allows.
inline void fill_abs_moments(const ChaosVector& F, double alpha, const std::vector<double>& pw, const McConfig& cfg,
                             BoundReport& rep) {
  std::vector<MomentRequest> req;
  for (double p : pw) {
    const std::string lab = pow_label("E|F+alpha|", p);
    if (p >= 0 && p == std::floor(p) && static_cast<long>(p) % 2 == 0) {
      try {
        rep.exact_moments[lab] = p == 0 ? 1.0 : moment(F + alpha, static_cast<int>(p));
        continue;
      } catch (const BudgetError&) {
        rep.warnings.push_back(lab + ": exact moment exceeds the order budget; using Monte Carlo");
      }
    }
    req.push_back({lab, p, 0, 0});
  }
  if (req.empty()) return;
  auto est = moment_menu(F, alpha, nullptr, nullptr, req, cfg);
  for (std::size_t i = 0; i < req.size(); ++i) rep.negative_moments[req[i].label] = est[i];
}

inline double lookup(const BoundReport& rep, const std::string& lab) {
  if (auto it = rep.exact_moments.find(lab); it != rep.exact_moments.end()) return it->second;
  if (auto it = rep.negative_moments.find(lab); it != rep.negative_moments.end()) return it->second.value;
  throw NumericalError("bound report: missing moment " + lab);
}

inline double stein_factor(const BoundReport& rep, const SteinEnvelope& env, int k) {
  const double a = env.alpha;
  const int top = env.top_power_index();
  auto m = [&](double p) { return std::sqrt(std::max(0.0, lookup(rep, pow_label("E|F+alpha|", p)))); };
  double s = 0.0;
  switch (env.branch) {
    case SteinEnvelope::Branch::Positive:
      for (int i = 1; i <= top; ++i) s += env.d1 * m(2 * (a - i));
      return s + env.d2 * m(-2.0) + env.d3;
    case SteinEnvelope::Branch::Negative:
      for (int i = 0; i <= top; ++i) s += env.e1 * m(2 * (a - i));
      return s + env.e2;
    case SteinEnvelope::Branch::Origin:
      s = env.g[0];
      for (int p = 1; p <= k + 2 && p < static_cast<int>(env.g.size()); ++p) s += env.g[p] * m(-2.0 * p);
      return s;
  }
  return s;
}

inline void check_origin(const std::vector<double>& xs, double alpha, int k) {
  for (double x : xs) {
    require(std::isfinite(x), "bound: grid points must be finite");
    if (x == 0.0 && !(alpha > k + 1))
      throw PreconditionError("bound: x = 0 requires alpha > " + std::to_string(k + 1));
  }
}

inline ChaosVector require_single_even_chaos(const ChaosVector& F, double alpha, int* q) {
  detail::pure_kernel(F, q);
  require_even_order(*q, "bound");
  detail::require_alpha_match(alpha, variance(F), "bound");
  return F;
}

inline void apply_precheck(const ChaosVector& F, double alpha, BoundReport& rep) {
  const auto chk = negative_moment_precheck(F, alpha);
  if (!chk.ok) throw PreconditionError("negative moments may not exist: " + chk.reason);
  for (const auto& w : chk.warnings) rep.warnings.push_back(w);
}

}  // namespace detail

// Shared part of the single-chaos bounds: combo, Theta variance, radical.
inline BoundReport single_chaos_report(const ChaosVector& F, double alpha) {
  BoundReport rep;
  detail::require_single_even_chaos(F, alpha, &rep.q);
  rep.alpha = alpha;
  rep.fourth_moment_combo = fourth_moment_combo(F, alpha);
  const ChaosVector T = theta(F, alpha);
  rep.theta_var = std::max(0.0, expect_product(T, T));
  // combo is (3/q^2) times a squared norm; snap rounding noise to zero
  const double scale = std::max(1.0, alpha * alpha);
  double combo = rep.fourth_moment_combo;
  if (std::abs(combo) <= 1e-9 * scale) combo = 0.0;
  if (combo < 0) rep.warnings.push_back("fourth-moment combination is negative beyond rounding; clamped to zero");
  rep.radical = std::sqrt(rep.q * rep.q / 3.0 * std::max(0.0, combo));
  rep.C1 = c1_constant(rep.q);
  return rep;
}

// |p_{F+alpha}(x) - p_G(x)| <= P0(x) sqrt(q^2/3 combo).
inline BoundReport assemble_bound_thm11(const ChaosVector& F, double alpha, const std::vector<double>& xs,
                                        const McConfig& cfg) {
  require(!xs.empty(), "bound: empty grid");
  BoundReport rep = single_chaos_report(F, alpha);
  rep.theorem = "1.1";
  detail::check_origin(xs, alpha, 0);
  detail::apply_precheck(F, alpha, rep);

  const ChaosVector W = carre_du_champ(F, F);
  const std::vector<MomentRequest> neg = {
      {"E[w^-2]", 0, -2, 0}, {"E[w^-2 |F+alpha|^-2]", -2, -2, 0}, {"E[w^-3]", 0, -3, 0}};
  auto est = moment_menu(F, alpha, &W, nullptr, neg, cfg);
  for (std::size_t i = 0; i < neg.size(); ++i) rep.negative_moments[neg[i].label] = est[i];
  detail::fill_abs_moments(F, alpha, detail::envelope_powers(alpha, 0, xs), cfg, rep);

  const double tail = std::sqrt(rep.negative_moments["E[w^-2]"].value) +
                      std::abs(alpha - 1) * std::sqrt(rep.negative_moments["E[w^-2 |F+alpha|^-2]"].value) +
                      rep.C1 * std::sqrt(rep.negative_moments["E[w^-3]"].value);
  for (double x : xs) {
    BoundPoint bp;
    bp.x = x;
    bp.env = envelope(alpha, 0, x);
    bp.stein_factor = detail::stein_factor(rep, bp.env, 0);
    bp.P = bp.stein_factor + tail;
    bp.bound = bp.P * rep.radical;
    rep.points.push_back(bp);
  }
  return rep;
}

// k-th derivative (k = 1, 2): P_k(x) = Stein envelope factor + ||T_{k+1}||_2 / ||Theta||_2,
// T_{k+1} = (-1)^k G_{k+1} - nu_{k+1}(F + alpha) estimated by Monte Carlo.
inline BoundReport assemble_bound_thm12(const ChaosVector& F, double alpha, int k, const std::vector<double>& xs,
                                        const McConfig& cfg) {
  require(k == 1 || k == 2, "bound: derivative order must be 1 or 2");
  require(!xs.empty(), "bound: empty grid");
  BoundReport rep = single_chaos_report(F, alpha);
  rep.theorem = "1.2";
  rep.k = k;
  detail::check_origin(xs, alpha, k);
  detail::apply_precheck(F, alpha, rep);

  const MalliavinWeights MW(F, k);
  const GammaTarget tg(alpha);
  const double sign = k % 2 ? -1.0 : 1.0;
  auto est = run_mc(cfg, 1, [&] {
    return [&, he = HermiteTable(MW.dim(), MW.maxdeg()), z = std::vector<double>(MW.dim())](Stream& s,
                                                                                            double* o) mutable {
      for (auto& v : z) v = s.normal();
      he.fill(z.data());
      if (!(MW.w(he) >= kMinMalliavinNorm)) return false;
      const double T = sign * MW.weight(he) - nu(tg, k + 1, MW.value(he) + alpha);
      o[0] = T * T;
      return true;
    };
  });
  rep.negative_moments["E[T^2]"] = est[0];
  detail::fill_abs_moments(F, alpha, detail::envelope_powers(alpha, k, xs), cfg, rep);

  const double th = std::sqrt(rep.theta_var);
  const double ratio = th > 1e-12 * std::max(1.0, alpha) ? std::sqrt(est[0].value) / th : 0.0;
  for (double x : xs) {
    BoundPoint bp;
    bp.x = x;
    bp.env = envelope(alpha, k, x);
    bp.stein_factor = detail::stein_factor(rep, bp.env, k);
    bp.P = bp.stein_factor + ratio;
    bp.bound = bp.P * rep.radical;
    rep.points.push_back(bp);
  }
  return rep;
}

// General (mixed chaos) bound with wbar = <DF, -DL^{-1}F>:
//   (S(x) + A2 + A3) sqrt(s/2 - 1) R_s + E[wbar^-6]^{1/3} E||DL^{-1}F||^3^{1/3} R_{max(s,8)},
//   R_t = E||D wbar - DF||^{t/2}^{2/t}.
inline BoundReport assemble_bound_thm61(const ChaosVector& F, double alpha, int s, const std::vector<double>& xs,
                                        const McConfig& cfg) {
  require(s == 4 || s == 8 || s == 12, "bound: s must be 4, 8 or 12");
  require(!xs.empty(), "bound: empty grid");
  require(F.top_order() >= 1, "bound: F must be non-constant");
  const double var = variance(F);
  if (std::abs(F.constant()) > 1e-9 * std::max(1.0, var)) throw PreconditionError("bound: F must be centred");
  detail::require_alpha_match(alpha, var, "bound");
  detail::check_origin(xs, alpha, 0);

  BoundReport rep;
  rep.theorem = "6.1";
  rep.alpha = alpha;
  rep.q = F.pure_order() > 0 ? F.pure_order() : 0;
  rep.s = s;
  const double rho = 1.0 - 3.0 / s;
  rep.p_exp = 2.0 / rho;
  rep.r_exp = 4.0 / rho;
  if (rep.q == 2)
    detail::apply_precheck(F, alpha, rep);
  else
    rep.warnings.push_back(
        "negative-moment existence cannot be certified outside the second chaos; Monte Carlo estimates may be "
        "unreliable");

  const ChaosVector L1 = inverse_L(F);
  const ChaosVector wbar = -1.0 * carre_du_champ(F, L1);
  const ChaosVector V = field_inner(field_sub(malliavin_D(wbar), malliavin_D(F)), field_sub(malliavin_D(wbar), malliavin_D(F)));
  const ChaosVector G = carre_du_champ(L1, L1);
  rep.exact_moments["E[wbar]"] = expectation(wbar);

  auto R = [&](int t) {
    const std::string lab = detail::pow_label("E||Dwbar-DF||", t / 2.0);
    if (t % 4 == 0) {
      try {
        const double m = moment(V, t / 4);
        rep.exact_moments[lab] = m;
        return std::pow(std::max(0.0, m), 2.0 / t);
      } catch (const BudgetError&) {
        rep.warnings.push_back(lab + ": exact moment exceeds the order budget; using Monte Carlo");
      }
    }
    // |Y|^0 wbar^0 V^{t/4}
    auto e = moment_menu(V, 0.0, nullptr, nullptr, {{lab, t / 4.0, 0, 0}}, cfg);
    rep.negative_moments[lab] = e[0];
    return std::pow(std::max(0.0, e[0].value), 2.0 / t);
  };
  rep.R_s = R(s);
  rep.R_3 = R(std::max(s, 8));
  rep.radical = rep.R_s;

  const std::vector<MomentRequest> neg = {{"E[wbar^-2]", 0, -2, 0},
                                          {"E[wbar^-2 |F+alpha|^-2]", -2, -2, 0},
                                          {"E[wbar^-6]", 0, -6, 0},
                                          {"E||DL^-1 F||^3", 0, 0, 1.5},
                                          {detail::pow_label("E|wbar|", -rep.r_exp), 0, -rep.r_exp, 0}};
  auto est = moment_menu(F, alpha, &wbar, &G, neg, cfg);
  for (std::size_t i = 0; i < neg.size(); ++i) rep.negative_moments[neg[i].label] = est[i];
  detail::fill_abs_moments(F, alpha, detail::envelope_powers(alpha, 0, xs), cfg, rep);

  const double m1 = std::sqrt(s / 2.0 - 1.0);
  const double A23 = m1 * (std::sqrt(est[0].value) + std::abs(1 - alpha) * std::sqrt(est[1].value));
  const double A4 = std::cbrt(est[2].value) * std::cbrt(est[3].value) * rep.R_3;
  for (double x : xs) {
    BoundPoint bp;
    bp.x = x;
    bp.env = envelope(alpha, 0, x);
    bp.stein_factor = detail::stein_factor(rep, bp.env, 0);
    bp.P = m1 * bp.stein_factor + A23;
    bp.bound = bp.P * rep.R_s + A4;
    rep.points.push_back(bp);
  }
  return rep;
}

}  // namespace gammachaos
