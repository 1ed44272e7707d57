#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "chaos.hpp"
#include "errors.hpp"
#include "gamma_target.hpp"
#include "monte_carlo.hpp"

namespace gammachaos {

namespace detail {

// tanh-sinh on finite intervals (robust to endpoint singularities), exp-sinh
// on [a, inf).
inline double quad(const std::function<double(double)>& f, double a, double b, double tol = 1e-13) {
  double err = 0.0, l1 = 0.0;
  double v;
  if (std::isinf(b)) {
    boost::math::quadrature::exp_sinh<double> q;
    v = q.integrate([&](double t) { return f(a + t); }, tol, &err, &l1);
  } else {
    boost::math::quadrature::tanh_sinh<double> q;
    v = q.integrate(f, a, b, tol, &err, &l1);
  }
  if (!std::isfinite(v)) throw NumericalError("quadrature produced a non-finite value");
  if (err > 1e-10 * std::max(1.0, l1)) {
    char buf[112];
    std::snprintf(buf, sizeof buf, "quadrature did not converge (error %.3g on [%g, %g])", err, a, b);
    throw NumericalError(buf);
  }
  return v;
}

// Adaptive Gauss-Kronrod for analytic integrands on interior intervals. Its
// error estimate is far too pessimistic on very short intervals, so only
// finiteness is checked; the ODE residual is the real acceptance test.
inline double quad_smooth(const std::function<double(double)>& f, double a, double b) {
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-13);
  if (!std::isfinite(v)) throw NumericalError("quadrature produced a non-finite value");
  return v;
}

// int_0^1 u^{beta-1} phi(u) du; below beta = 1 the endpoint singularity is
// removed with u = v^{1/beta}.
inline double unit_integral(double beta, const std::function<double(double)>& phi) {
  if (beta >= 1.0) return quad([&](double u) { return std::pow(u, beta - 1.0) * phi(u); }, 0.0, 1.0);
  return quad([&](double v) { return phi(std::pow(v, 1.0 / beta)); }, 0.0, 1.0) / beta;
}

// derivative of nu_k as a Laurent sum
inline double nu_prime(const std::vector<double>& c, double y) {
  double s = 0.0;
  for (std::size_t i = 1; i < c.size(); ++i) s -= static_cast<double>(i) * c[i] * std::pow(y, -static_cast<double>(i) - 1.0);
  return s;
}

inline double abs_shift(double alpha, int i) {
  double p = 1.0;
  for (int j = 1; j <= i; ++j) p *= std::abs(j - alpha);
  return p;
}

}  // namespace detail

// Stein equation y f'(y) + (alpha - y) f(y) = h(y) - E h(G) with
//   x > 0: h = 1_{y > x}  nu_{k+1}
//   x < 0: h = 1_{y <= x} nu_{k+1}
//   x = 0: h = 1_{y < 0}  nu_{k+1}   (needs alpha > k + 1)
struct SteinProblem {
  GammaTarget target;
  int k;
  double x;

  SteinProblem(double alpha, int k_, double x_) : target(alpha), k(k_), x(x_) {
    require(k >= 0, "Stein problem: k must be non-negative");
    require(std::isfinite(x), "Stein problem: threshold must be finite");
    if (x == 0.0 && !(alpha > k + 1))
      throw PreconditionError("Stein problem: x = 0 requires alpha > k + 1");
  }
  double alpha() const { return target.alpha; }

  double h(double y) const {
    const bool on = x > 0.0 ? y > x : (x < 0.0 ? y <= x : y < 0.0);
    return on ? nu(target, k + 1, y) : 0.0;
  }
  // E h(G) = p^{(k)}(x) for x > 0, zero otherwise.
  double Eh() const { return x > 0.0 ? gamma_pdf_deriv(target, k, x) : 0.0; }
};

struct SteinPoint {
  double y, f, fprime, residual;
};

struct SteinSolution {
  double alpha = 0.0;
  int k = 0;
  double x = 0.0;
  double Eh = 0.0;
  double Eh_quadrature = 0.0;
  std::vector<double> grid, f_values, fprime_values, residuals;
};

// f and f' at one point, each from its own integral representation, so the
// ODE residual is a genuine check.
inline SteinPoint stein_point(const SteinProblem& P, double y) {
  require(y != 0.0 && std::isfinite(y), "Stein solution: y must be finite and non-zero");
  const double a = P.alpha(), x = P.x;
  const auto c = nu_coefficients(P.target, P.k + 1);
  auto nuv = [&](double t) { return nu(P.target, P.k + 1, t); };
  double f = 0.0, fp = 0.0;
  if (x > 0.0) {
    const double Eh = P.Eh();
    if (y <= x) {
      f = -Eh * detail::unit_integral(a, [&](double u) { return std::exp(y * (1 - u)); });
      fp = -Eh * detail::unit_integral(a, [&](double u) { return (1 - u) * std::exp(y * (1 - u)); });
    } else {
      // tail form, using int_0^inf (h - Eh) t^{a-1} e^{-t} dt = 0
      f = -detail::quad(
              [&](double s) { return (nuv(y + s) - Eh) * std::exp(-s + (a - 1) * std::log1p(s / y)); }, 0.0,
              INFINITY) /
          y;
      fp = -detail::quad(
               [&](double s) {
                 const double r = 1 + s / y;
                 return (r * detail::nu_prime(c, y + s) - (s / y) * (nuv(y + s) - Eh)) *
                        std::exp(-s + (a - 1) * std::log(r));
               },
               0.0, INFINITY) /
           y;
    }
  } else if (x < 0.0) {
    if (y <= x) {
      const double lo = x / y;
      auto body = [&](double u, bool deriv) {
        const double e = std::pow(u, a - 1) * std::exp(y * (1 - u));
        return deriv ? (u * detail::nu_prime(c, y * u) + (1 - u) * nuv(y * u)) * e : nuv(y * u) * e;
      };
      f = lo < 1.0 ? detail::quad_smooth([&](double u) { return body(u, false); }, lo, 1.0) : 0.0;
      fp = (x / (y * y)) * nuv(x) * std::pow(lo, a - 1) * std::exp(y - x);
      if (lo < 1.0) fp += detail::quad_smooth([&](double u) { return body(u, true); }, lo, 1.0);
    }
  } else if (y < 0.0) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double beta = a - static_cast<double>(i);
      const double K = detail::unit_integral(beta, [&](double u) { return std::exp(y * (1 - u)); });
      const double Kp = detail::unit_integral(beta, [&](double u) { return (1 - u) * std::exp(y * (1 - u)); });
      const double yi = std::pow(y, -static_cast<double>(i));
      f += c[i] * yi * K;
      fp += c[i] * (-static_cast<double>(i) * yi / y * K + yi * Kp);
    }
  }
  const double res = y * fp + (a - y) * f - (P.h(y) - P.Eh());
  return {y, f, fp, res};
}

inline SteinSolution solve(double alpha, int k, double x, const std::vector<double>& grid) {
  SteinProblem P(alpha, k, x);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(grid[i] != 0.0, "Stein grid must exclude 0");
    if (i > 0) require(grid[i] > grid[i - 1], "Stein grid must be strictly increasing");
  }
  SteinSolution s;
  s.alpha = alpha;
  s.k = k;
  s.x = x;
  s.Eh = P.Eh();
  if (x > 0.0) {
    const double g = boost::math::lgamma(alpha);
    s.Eh_quadrature = detail::quad(
        [&](double t) { return nu(P.target, k + 1, x + t) * std::exp((alpha - 1) * std::log(x + t) - x - t - g); },
        0.0, INFINITY);
  }
  s.grid = grid;
  for (double y : grid) {
    const auto p = stein_point(P, y);
    s.f_values.push_back(p.f);
    s.fprime_values.push_back(p.fprime);
    s.residuals.push_back(p.residual);
  }
  return s;
}

// Pointwise bound max(|f|, |f'|)(y) <= envelope(y).
//   x > 0: d1 sum_{i=1}^{ceil(a)-1} |y|^{a-i} + d2/|y| + d3
//   x < 0: e1 sum_{i=0}^{ceil(a)-1} |y|^{a-i} + e2
//   x = 0: sum_p g_p |y|^{-p}
struct SteinEnvelope {
  enum class Branch { Positive, Negative, Origin } branch = Branch::Positive;
  double alpha = 1.0;
  double d1 = 0, d2 = 0, d3 = 0;
  double e1 = 0, e2 = 0;
  std::vector<double> g;

  int top_power_index() const { return static_cast<int>(std::ceil(alpha)) - 1; }

  double operator()(double y) const {
    const double ay = std::abs(y);
    double s = 0.0;
    switch (branch) {
      case Branch::Positive:
        for (int i = 1; i <= top_power_index(); ++i) s += d1 * std::pow(ay, alpha - i);
        return s + d2 / ay + d3;
      case Branch::Negative:
        for (int i = 0; i <= top_power_index(); ++i) s += e1 * std::pow(ay, alpha - i);
        return s + e2;
      case Branch::Origin:
        for (std::size_t p = 0; p < g.size(); ++p) s += g[p] * std::pow(ay, -static_cast<double>(p));
        return s;
    }
    return s;
  }
};

inline SteinEnvelope envelope(double alpha, int k, double x) {
  SteinProblem P(alpha, k, x);
  SteinEnvelope env;
  env.alpha = alpha;
  const int c = static_cast<int>(std::ceil(alpha));
  std::vector<double> cnu(k + 2);  // |coefficients| of nu_{k+1}
  for (int i = 0; i <= k + 1; ++i) cnu[i] = binom(k + 1, i) * detail::abs_shift(alpha, i);

  if (x > 0.0) {
    env.branch = SteinEnvelope::Branch::Positive;
    const double E = std::abs(P.Eh());
    double A1 = 0.0;
    for (int i = 0; i <= k; ++i) A1 += binom(k, i) * detail::abs_shift(alpha, i) * std::pow(x, -i);
    A1 *= 1 / x + alpha / (x * x);
    const double Pf = E * (std::pow(x, -alpha) + alpha * std::pow(x, -alpha - 1));
    // |prod_{m=1}^{n-1} (alpha - m)|
    auto pi = [&](int n) { return detail::abs_shift(alpha, n - 1); };
    double pimax = 1.0;
    for (int n = 1; n <= c - 1; ++n) pimax = std::max(pimax, pi(n));
    const bool integer_alpha = alpha == std::floor(alpha);
    const double rem = integer_alpha ? 0.0 : pi(c + 1) / (c - alpha);
    double A3 = E / x;
    for (int i = 0; i <= k + 1; ++i) A3 += cnu[i] * std::pow(x, -i - 1);
    env.d1 = Pf * pimax;
    env.d2 = E * (std::exp(x) + 1);
    env.d3 = E * std::exp(x) / alpha + A1 + Pf * (pi(c) + rem) * std::pow(x, alpha - c) + A3;
  } else if (x < 0.0) {
    env.branch = SteinEnvelope::Branch::Negative;
    const double ax = std::abs(x);
    const double Px = std::pow(ax, -alpha) + alpha * std::pow(ax, -alpha - 1);
    std::vector<double> coef(std::max(c, 1), 0.0);  // coefficient of |y|^{alpha - i}
    double e2 = 0.0;
    for (int i = 0; i <= k + 1; ++i) {
      const double beta = alpha - i;
      if (std::abs(beta) < 1e-12) {
        // log(|y|/|x|) <= |y|/|x| = |y|^{alpha-(alpha-1)} / |x|
        coef[i - 1] += Px * cnu[i] / ax;
      } else if (beta > 0) {
        coef[i] += Px * cnu[i] / beta;
      } else {
        e2 += Px * cnu[i] * std::pow(ax, beta) / -beta;
      }
      e2 += cnu[i] * std::pow(ax, -i - 1);
    }
    env.e1 = *std::max_element(coef.begin(), coef.end());
    env.e2 = e2;
  } else {
    env.branch = SteinEnvelope::Branch::Origin;
    // |f| <= sum |c_i| |y|^{-i} / beta_i ;  |f'| adds i |c_i| |y|^{-i-1} / beta_i
    env.g.assign(k + 3, 0.0);
    for (int i = 0; i <= k + 1; ++i) {
      const double beta = alpha - i;
      env.g[i] += cnu[i] / beta;
      env.g[i + 1] += i * cnu[i] / beta;
    }
  }
  return env;
}

struct SteinDiscrepancy {
  McEstimate lhs_raw;      // E[h(F + alpha)]
  double target = 0.0;     // E[h(G)]
  double lhs = 0.0;        // |lhs_raw - target|
  double rhs = 0.0;        // envelope moments x theta_l2
  double theta_l2 = 0.0;   // E[(F + alpha - <DF, -DL^{-1}F>)^2]^{1/2}, exact
  std::vector<std::string> moment_labels;
  std::vector<McEstimate> moments;
  SteinEnvelope env;

  bool dominated(double sigmas = 4.0) const { return lhs <= rhs + sigmas * lhs_raw.stderr_; }
};

// E[(F + alpha - <DF, -DL^{-1}F>)^2], computed exactly in the chaos algebra.
inline double stein_theta_l2(const ChaosVector& F, double alpha) {
  ChaosVector G = F + alpha;
  G += carre_du_champ(F, inverse_L(F));
  return std::sqrt(std::max(0.0, expect_product(G, G)));
}

inline SteinDiscrepancy stein_discrepancy(const ChaosVector& F, double alpha, int k, double x, const McConfig& cfg) {
  const double var = expect_product(F, F) - F.constant() * F.constant();
  if (std::abs(F.constant()) > 1e-9 * std::max(1.0, alpha) || std::abs(var - alpha) > 1e-9 * std::max(1.0, alpha))
    throw PreconditionError("stein_discrepancy: need E F = 0 and E F^2 = alpha");
  SteinProblem P(alpha, k, x);
  SteinDiscrepancy out;
  out.env = envelope(alpha, k, x);
  out.target = P.Eh();
  out.theta_l2 = stein_theta_l2(F, alpha);

  // powers p with E|Y|^{2p} needed by the envelope shape
  std::vector<double> pw;
  const int top = out.env.top_power_index();
  switch (out.env.branch) {
    case SteinEnvelope::Branch::Positive:
      for (int i = 1; i <= top; ++i) pw.push_back(alpha - i);
      pw.push_back(-1.0);
      break;
    case SteinEnvelope::Branch::Negative:
      for (int i = 0; i <= top; ++i) pw.push_back(alpha - i);
      break;
    case SteinEnvelope::Branch::Origin:
      for (std::size_t p = 1; p < out.env.g.size(); ++p) pw.push_back(-static_cast<double>(p));
      break;
  }
  for (double p : pw) out.moment_labels.push_back("E|F+alpha|^" + std::to_string(2 * p));

  const CompiledChaos C(F);
  auto est = run_mc(cfg, 1 + pw.size(), [&] {
    return [&, he = HermiteTable(F.dim(), std::max(1, C.maxdeg())), z = std::vector<double>(F.dim())](
               Stream& s, double* o) mutable {
      for (auto& v : z) v = s.normal();
      he.fill(z.data());
      const double Y = C(he) + alpha;
      o[0] = P.h(Y);
      for (std::size_t i = 0; i < pw.size(); ++i) o[1 + i] = std::pow(std::abs(Y), 2 * pw[i]);
      return true;
    };
  });
  out.lhs_raw = est[0];
  out.lhs = std::abs(est[0].value - out.target);
  out.moments.assign(est.begin() + 1, est.end());

  double factor = 0.0;
  std::size_t m = 0;
  switch (out.env.branch) {
    case SteinEnvelope::Branch::Positive:
      for (int i = 1; i <= top; ++i) factor += out.env.d1 * std::sqrt(out.moments[m++].value);
      factor += out.env.d2 * std::sqrt(out.moments[m++].value) + out.env.d3;
      break;
    case SteinEnvelope::Branch::Negative:
      for (int i = 0; i <= top; ++i) factor += out.env.e1 * std::sqrt(out.moments[m++].value);
      factor += out.env.e2;
      break;
    case SteinEnvelope::Branch::Origin:
      factor = out.env.g[0];
      for (std::size_t p = 1; p < out.env.g.size(); ++p) factor += out.env.g[p] * std::sqrt(out.moments[m++].value);
      break;
  }
  out.rhs = factor * out.theta_l2;
  return out;
}

}  // namespace gammachaos
