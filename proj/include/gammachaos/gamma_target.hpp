#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "errors.hpp"
#include "hermite.hpp"
#include "monte_carlo.hpp"
#include "multi_index.hpp"

namespace gammachaos {

struct GammaTarget {
  double alpha = 1.0;
  explicit GammaTarget(double a) : alpha(a) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ValidationError("Gamma target: alpha must be positive");
  }
};

// prod_{j=1}^{i} (j - alpha), forward product.
inline double falling_shift(double alpha, int i) {
  double p = 1.0;
  for (int j = 1; j <= i; ++j) p *= (j - alpha);
  return p;
}

inline double gamma_pdf(const GammaTarget& t, double x) {
  if (x <= 0.0) return 0.0;
  return std::exp((t.alpha - 1.0) * std::log(x) - x - boost::math::lgamma(t.alpha));
}

// k-th derivative: (-1)^k p(x) sum_i C(k,i) prod_{j<=i}(j-alpha) x^{-i}.
inline double gamma_pdf_deriv(const GammaTarget& t, int k, double x) {
  require(k >= 0, "gamma_pdf_deriv: negative derivative order");
  if (x == 0.0) {
    if (t.alpha > k + 1) return 0.0;
    throw PreconditionError("gamma_pdf_deriv: undefined at origin unless alpha > k + 1");
  }
  if (x < 0.0) return 0.0;
  if (k == 0) return gamma_pdf(t, x);
  // fold x^{-i} into the exponent so tiny x does not produce 0 * inf
  const double lx = std::log(x), base = -x - boost::math::lgamma(t.alpha);
  double s = 0.0;
  for (int i = 0; i <= k; ++i)
    s += binom(k, i) * falling_shift(t.alpha, i) * std::exp((t.alpha - 1.0 - i) * lx + base);
  return (k % 2 ? -1.0 : 1.0) * s;
}

// nu_k(y) = (-1)^{k-1} sum_{i=0}^{k} C(k,i) prod_{j<=i}(j-alpha) y^{-i}; nu_k(0) = 0.
inline double nu(const GammaTarget& t, int k, double y) {
  require(k >= 1, "nu: index must be at least 1");
  if (y == 0.0) return 0.0;
  double s = 0.0, yi = 1.0;
  for (int i = 0; i <= k; ++i) {
    s += binom(k, i) * falling_shift(t.alpha, i) * yi;
    yi /= y;
  }
  return (k % 2 ? 1.0 : -1.0) * s;
}

// The same function as a Laurent polynomial: nu_k(y) = sum_i coeff[i] y^{-i}.
inline std::vector<double> nu_coefficients(const GammaTarget& t, int k) {
  std::vector<double> c(k + 1);
  for (int i = 0; i <= k; ++i) c[i] = (k % 2 ? 1.0 : -1.0) * binom(k, i) * falling_shift(t.alpha, i);
  return c;
}

// E[1_{G > x} nu_{k+1}(G)] for x > 0, E[1_{G < x} nu_{k+1}(G)] for x <= 0,
// one estimate per x from a shared sample of G.
inline std::vector<McEstimate> representation_check(const GammaTarget& t, int k, const std::vector<double>& xs,
                                                    const McConfig& cfg) {
  require(k >= 0, "representation_check: negative derivative order");
  for (double x : xs)
    if (x == 0.0 && !(t.alpha > k + 1))
      throw PreconditionError("representation_check: x = 0 needs alpha > k + 1");
  return run_mc(cfg, xs.size(), [&] {
    return [&](Stream& s, double* out) {
      const double g = s.gamma(t.alpha);
      const double v = nu(t, k + 1, g);
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double x = xs[i];
        out[i] = (x > 0.0 ? g > x : g < x) ? v : 0.0;
      }
      return true;
    };
  });
}

inline McEstimate representation_check(const GammaTarget& t, int k, double x, const McConfig& cfg) {
  return representation_check(t, k, std::vector<double>{x}, cfg).front();
}

// Laguerre generator L f = x f'' + (alpha - x) f'.
inline Poly laguerre_L(const Poly& p, const GammaTarget& t) {
  Poly d1 = p.derivative(), d2 = d1.derivative();
  return Poly::identity() * d2 + Poly({t.alpha, -1.0}) * d1;
}

// Carre du champ Gamma(f, g) = x f' g'.
inline Poly laguerre_carre(const Poly& f, const Poly& g) {
  return Poly::identity() * f.derivative() * g.derivative();
}
inline Poly laguerre_carre(const Poly& f) { return laguerre_carre(f, f); }

// E[G^n] = alpha (alpha + 1) ... (alpha + n - 1).
inline double gamma_moment(const GammaTarget& t, int n) {
  double m = 1.0;
  for (int i = 0; i < n; ++i) m *= t.alpha + i;
  return m;
}

inline double gamma_expect(const GammaTarget& t, const Poly& p) {
  double s = 0.0;
  for (int i = 0; i <= p.degree(); ++i) s += p.coeff(i) * gamma_moment(t, i);
  return s;
}

// One-dimensional diffusion with generator a(x) f'' + b(x) f' on (lo, hi).
// With half_sigma_squared the callables give sigma and a = sigma^2 / 2;
// otherwise sigma is read directly as the diffusion coefficient a.
struct DiffusionSpec {
  std::function<double(double)> drift;
  std::function<double(double)> sigma;
  std::function<double(double)> dsigma;
  double lo = -INFINITY;
  double hi = INFINITY;
  bool half_sigma_squared = true;

  // (a'(y) - b(y)) / a(y)
  double weight(double y) const {
    double a, da;
    if (half_sigma_squared) {
      const double s = sigma(y);
      a = 0.5 * s * s;
      da = s * dsigma(y);
    } else {
      a = sigma(y);
      da = dsigma(y);
    }
    return (da - drift(y)) / a;
  }
};

// p(x) = E[1_{x <= F} (a'(F) - b(F)) / a(F)], F drawn from the invariant law.
inline std::vector<McEstimate> diffusion_density_rep(const DiffusionSpec& spec,
                                                     const std::function<double(Stream&)>& sampler,
                                                     const std::vector<double>& xs, const McConfig& cfg) {
  require(static_cast<bool>(spec.drift) && static_cast<bool>(spec.sigma) && static_cast<bool>(spec.dsigma),
          "diffusion spec: drift, sigma and dsigma are required");
  return run_mc(cfg, xs.size(), [&] {
    return [&](Stream& s, double* out) {
      const double y = sampler(s);
      if (!std::isfinite(y)) throw NumericalError("diffusion sampler produced a non-finite value");
      const bool inside = y > spec.lo && y < spec.hi;
      const double w = inside ? spec.weight(y) : 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (xs[i] <= y) ? w : 0.0;
      return true;
    };
  });
}

}  // namespace gammachaos
