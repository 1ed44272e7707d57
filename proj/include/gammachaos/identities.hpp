#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "bounds.hpp"
#include "chaos.hpp"

namespace gammachaos {

// Exact-identity suite on randomized inputs.
struct IdentityResult {
  std::string name;
  int cases = 0;
  double max_error = 0.0;  // relative, see rel()
  double tolerance = 0.0;
  bool pass() const { return max_error <= tolerance; }
};

namespace detail {

inline double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

inline double coeff_scale(const ChaosVector& F) {
  double s = std::abs(F.constant());
  for (const auto& [n, f] : F.kernels())
    for (const auto& [m, v] : f.entries()) s = std::max(s, std::abs(v));
  return s;
}

// max |coefficient| of F - G relative to max(1, max |coefficient of G|)
inline double coeff_diff(const ChaosVector& F, const ChaosVector& G) {
  return coeff_scale(F - G) / std::max(1.0, coeff_scale(G));
}

inline ChaosVector random_chaos(int dim, const std::vector<int>& orders, std::mt19937_64& rng, double scale,
                                bool constant) {
  std::normal_distribution<double> nd(0.0, scale);
  ChaosVector F(dim, constant ? nd(rng) : 0.0);
  for (int n : orders) F.add_kernel(random_sym_tensor(n, dim, rng, scale));
  return F;
}

}  // namespace detail

struct IdentitySuiteOptions {
  std::uint64_t seed = 20240601;
  int second_chaos_cases = 20;
  int quartic_cases = 5;
  int max_dim = 6;
  double tol = 1e-10;
  double recursion_tol = 1e-12;
};

// Operator calculus: isometry, orthogonality, duality, -delta D = L,
// L L^{-1} F = F - E F, carre du champ.
inline std::vector<IdentityResult> operator_identities(const IdentitySuiteOptions& o = {}) {
  std::mt19937_64 rng(o.seed);
  IdentityResult iso{"isometry", 0, 0.0, o.tol}, orth{"orthogonality", 0, 0.0, o.tol},
      dual{"duality", 0, 0.0, o.tol}, dd{"minus_delta_D_equals_L", 0, 0.0, o.tol},
      inv{"L_inverse_L", 0, 0.0, o.tol}, cdc{"carre_du_champ", 0, 0.0, o.tol};
  for (int t = 0; t < 10; ++t) {
    const int d = 2 + t % 3;
    for (int q = 1; q <= 4; ++q) {
      const auto f = random_sym_tensor(q, d, rng, 0.5);
      const auto F = ChaosVector::from_kernel(f);
      // E[I_q(f)^2] read off the product formula's constant term
      iso.max_error = std::max(iso.max_error, detail::rel(multiply(F, F).constant(), factorial(q) * f.norm2()));
      ++iso.cases;
      const auto G = ChaosVector::from_kernel(random_sym_tensor(q % 4 + 1, d, rng, 0.5));
      orth.max_error = std::max(orth.max_error, std::abs(multiply(F, G).constant()));
      ++orth.cases;
    }
    const auto F = detail::random_chaos(d, {1, 2, 3}, rng, 0.5, true);
    ChaosField u;
    for (int j = 0; j < d; ++j) u.comp.push_back(detail::random_chaos(d, {1, 2}, rng, 0.5, true));
    dual.max_error = std::max(dual.max_error, detail::rel(expect_product(F, divergence(u)),
                                                          expectation(field_inner(malliavin_D(F), u))));
    ++dual.cases;
    dd.max_error = std::max(dd.max_error, detail::coeff_diff(-1.0 * divergence(malliavin_D(F)), generator_L(F)));
    ++dd.cases;
    inv.max_error = std::max(inv.max_error, detail::coeff_diff(generator_L(inverse_L(F)), F + (-F.constant())));
    ++inv.cases;
    const auto H = detail::random_chaos(d, {1, 2}, rng, 0.5, true);
    const auto rhs = generator_L(multiply(F, H)) - multiply(F, generator_L(H)) - multiply(H, generator_L(F));
    cdc.max_error = std::max(cdc.max_error, detail::coeff_diff(2.0 * carre_du_champ(F, H), rhs));
    ++cdc.cases;
  }
  return {iso, orth, dual, dd, inv, cdc};
}

// Contraction expansions against direct engine values, D Theta = q Lambda(2,1),
// and the lambda recursion.
inline std::vector<IdentityResult> contraction_identities(const IdentitySuiteOptions& o = {}) {
  std::mt19937_64 rng(o.seed ^ 0x9e3779b97f4a7c15ull);
  IdentityResult l51{"theta_variance_expansion", 0, 0.0, o.tol}, l52{"second_derivative_expansion", 0, 0.0, o.tol},
      l54{"lambda_norm_expansion", 0, 0.0, o.tol}, dth{"dtheta_equals_q_lambda21", 0, 0.0, o.tol},
      rec{"lambda_recursion", 0, 0.0, o.recursion_tol};
  auto one = [&](const SymTensor& f) {
    const int q = f.order();
    const double a = factorial(q) * f.norm2();
    const auto F = ChaosVector::from_kernel(f);
    const auto T = theta(F, a);
    l51.max_error = std::max(l51.max_error, detail::rel(lemma51_rhs(f, a), expect_product(T, T)));
    ++l51.cases;
    l52.max_error = std::max(l52.max_error, detail::rel(lemma52_rhs(f), lemma52_direct(f)));
    ++l52.cases;
    for (int k = 2; k <= q / 2 + 1; ++k)
      for (int l = 1; l <= k; ++l) {
        if (k + l < 3) continue;
        const double direct = lambda_field(F, k, l).expected_norm2();
        l54.max_error = std::max(l54.max_error, detail::rel(lemma54_expansion(f, k, l), direct));
        if (k == 2 && l == 1) l54.max_error = std::max(l54.max_error, detail::rel(lemma54_rhs(f, k, l), direct));
        ++l54.cases;
      }
    // D Theta = q Lambda(2, 1)
    const auto L = lambda_field(F, 2, 1);
    const double sc = std::max(1.0, detail::coeff_scale(T));
    double e = 0.0;
    for (int j = 0; j < F.dim(); ++j)
      e = std::max(e, detail::coeff_scale(malliavin_component(T, j) - static_cast<double>(q) * L.at(j, 0)) / sc);
    dth.max_error = std::max(dth.max_error, e);
    ++dth.cases;
  };
  for (int t = 0; t < o.second_chaos_cases; ++t) one(random_sym_tensor(2, 2 + t % (o.max_dim - 1), rng, 0.4));
  for (int t = 0; t < o.quartic_cases; ++t) one(random_sym_tensor(4, 2 + t % (o.max_dim - 1), rng, 0.3));
  for (int q = 2; q <= 8; q += 2)
    for (int k = 1; k <= q / 2; ++k)
      for (int l = 1; l <= q / 2; ++l) {
        if (k + l < 3) continue;
        const double lhs = 1 / lambda_const(k + 1, l, q) + 1 / lambda_const(k, l + 1, q);
        rec.max_error = std::max(rec.max_error, std::abs(lhs - 1 / lambda_const(k, l, q)) / std::abs(lhs));
        ++rec.cases;
      }
  return {l51, l52, l54, dth, rec};
}

}  // namespace gammachaos
