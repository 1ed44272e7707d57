#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>

#include "chaos.hpp"
#include "errors.hpp"
#include "gamma_target.hpp"
#include "monte_carlo.hpp"

namespace gammachaos {

// F = sum_i zeta_i (z_i^2 - 1), shifted by alpha.
struct SecondChaosSpec {
  std::vector<double> zeta;
  double alpha = 0.0;

  void validate() const {
    require(!zeta.empty(), "second chaos spec: zeta must be non-empty");
    for (std::size_t i = 0; i < zeta.size(); ++i) {
      require(std::isfinite(zeta[i]) && zeta[i] > 0.0, "second chaos spec: zeta must be positive");
      if (i > 0) require(zeta[i] <= zeta[i - 1], "second chaos spec: zeta must be non-increasing");
    }
    require(std::isfinite(alpha), "second chaos spec: alpha must be finite");
  }
  ChaosVector to_chaos() const {
    validate();
    return ChaosVector::from_kernel(diagonal_tensor(zeta));
  }
  double variance() const {
    double s = 0.0;
    for (double z : zeta) s += 2 * z * z;
    return s;
  }
  double zeta_sum() const {
    double s = 0.0;
    for (double z : zeta) s += z;
    return s;
  }
};

// Pointwise sampler for a chaos variable: value and gradient at z.
class ChaosSampler {
 public:
  explicit ChaosSampler(const ChaosVector& F, bool with_gradient = false) : F_(F) {
    int deg = std::max(1, F.top_order());
    if (with_gradient) {
      for (int j = 0; j < F.dim(); ++j) grad_.emplace_back(malliavin_component(F, j));
    }
    maxdeg_ = deg;
  }
  int dim() const { return F_.dim(); }
  int maxdeg() const { return maxdeg_; }
  const CompiledChaos& value() const { return F_; }
  double grad_norm2(const HermiteTable& he) const {
    double s = 0.0;
    for (const auto& g : grad_) {
      const double v = g(he);
      s += v * v;
    }
    return s;
  }

 private:
  CompiledChaos F_;
  std::vector<CompiledChaos> grad_;
  int maxdeg_ = 1;
};

// Closed catalog of pointwise functionals for mc_expect. Y = F + shift.
struct McFunctional {
  enum class Kind {
    Power,        // Y^p, p integer
    IndicatorNu,  // 1_{Y > x} * nu_k(Y), or 1_{Y > x} when k = 0
    AbsPower      // |Y|^r * ||DF||^p
  } kind = Kind::Power;
  double shift = 0.0;
  double x = 0.0;
  double p = 1.0;
  double r = 0.0;
  int nu_k = 0;
  double nu_alpha = 1.0;

  static McFunctional power(int p, double shift = 0.0) { return {Kind::Power, shift, 0.0, double(p), 0.0, 0, 1.0}; }
  static McFunctional indicator(double x, double shift, int nu_k = 0, double nu_alpha = 1.0) {
    return {Kind::IndicatorNu, shift, x, 0.0, 0.0, nu_k, nu_alpha};
  }
  static McFunctional abs_power(double r, double shift, double grad_p = 0.0) {
    return {Kind::AbsPower, shift, 0.0, grad_p, r, 0, 1.0};
  }
  bool needs_gradient() const { return kind == Kind::AbsPower && p != 0.0; }
};

inline std::vector<McEstimate> mc_expect(const ChaosVector& F, const std::vector<McFunctional>& g,
                                         const McConfig& cfg) {
  require(!g.empty(), "mc_expect: empty functional list");
  bool grad = false;
  for (const auto& f : g) {
    if (f.kind == McFunctional::Kind::Power)
      require(f.p == std::floor(f.p) && f.p >= 0, "mc_expect: power must be a non-negative integer");
    grad = grad || f.needs_gradient();
  }
  const ChaosSampler S(F, grad);
  return run_mc(cfg, g.size(), [&] {
    return [&, he = HermiteTable(S.dim(), S.maxdeg()), z = std::vector<double>(S.dim())](Stream& s,
                                                                                          double* out) mutable {
      for (auto& v : z) v = s.normal();
      he.fill(z.data());
      const double f = S.value()(he);
      const double w = grad ? S.grad_norm2(he) : 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const auto& q = g[i];
        const double Y = f + q.shift;
        switch (q.kind) {
          case McFunctional::Kind::Power:
            out[i] = std::pow(Y, q.p);
            break;
          case McFunctional::Kind::IndicatorNu:
            out[i] = Y > q.x ? (q.nu_k > 0 ? nu(GammaTarget(q.nu_alpha), q.nu_k, Y) : 1.0) : 0.0;
            break;
          case McFunctional::Kind::AbsPower:
            out[i] = (q.r != 0.0 ? std::pow(std::abs(Y), q.r) : 1.0) * (q.p != 0.0 ? std::pow(w, q.p / 2) : 1.0);
            break;
        }
      }
      return true;
    };
  });
}

inline McEstimate mc_expect(const ChaosVector& F, const McFunctional& g, const McConfig& cfg) {
  return mc_expect(F, std::vector<McFunctional>{g}, cfg).front();
}

// Truncated Taylor series in a formal parameter; used to push the derivation
// X -> Gamma(F, X) = <DF, DX> through rational expressions.
template <int M>
struct Series {
  std::array<double, M + 1> a{};

  static Series from_derivatives(const double* d) {  // d[j] = j-th derivative
    Series s;
    double fact = 1.0;
    for (int j = 0; j <= M; ++j) {
      if (j > 0) fact *= j;
      s.a[j] = d[j] / fact;
    }
    return s;
  }
  Series deriv() const {
    Series s;
    for (int j = 0; j < M; ++j) s.a[j] = (j + 1) * a[j + 1];
    return s;
  }
  friend Series operator+(Series x, const Series& y) {
    for (int j = 0; j <= M; ++j) x.a[j] += y.a[j];
    return x;
  }
  friend Series operator-(Series x, const Series& y) {
    for (int j = 0; j <= M; ++j) x.a[j] -= y.a[j];
    return x;
  }
  friend Series operator*(const Series& x, const Series& y) {
    Series s;
    for (int i = 0; i <= M; ++i)
      for (int j = 0; i + j <= M; ++j) s.a[i + j] += x.a[i] * y.a[j];
    return s;
  }
  friend Series operator/(const Series& x, const Series& y) {
    Series q;
    for (int n = 0; n <= M; ++n) {
      double v = x.a[n];
      for (int j = 1; j <= n; ++j) v -= y.a[j] * q.a[n - j];
      q.a[n] = v / y.a[0];
    }
    return q;
  }
};

// Malliavin weights G_1..G_3 for p^{(k)}(x) = (-1)^k E[1_{F > x} G_{k+1}].
// With u = DF / w, w = ||DF||^2 and X' = Gamma(F, X):
//   G_1 = delta(u) = (-LF)/w + w'/w^2,   G_{j+1} = G_j G_1 - G_j'/w.
// The iterated Gamma(F, .) of -LF and w are exact chaos expansions; all other
// derivatives follow from series arithmetic.
class MalliavinWeights {
 public:
  MalliavinWeights(const ChaosVector& F, int k) : k_(k) {
    require(k >= 0 && k <= 2, "density_malliavin: derivative order k must be 0, 1 or 2");
    require(F.top_order() >= 1, "density_malliavin: F must be non-constant");
    ChaosVector N = -1.0 * generator_L(F);
    ChaosVector w = carre_du_champ(F, F);
    int deg = std::max(1, F.top_order());
    auto push = [&](std::vector<CompiledChaos>& v, const ChaosVector& X) {
      v.emplace_back(X);
      deg = std::max(deg, v.back().maxdeg());
    };
    for (int j = 0; j <= k; ++j) {
      push(N_, N);
      if (j < k) N = carre_du_champ(F, N);
    }
    for (int j = 0; j <= k + 1; ++j) {
      push(w_, w);
      if (j < k + 1) w = carre_du_champ(F, w);
    }
    F_ = CompiledChaos(F);
    maxdeg_ = deg;
    dim_ = F.dim();
  }

  int dim() const { return dim_; }
  int maxdeg() const { return maxdeg_; }
  double value(const HermiteTable& he) const { return F_(he); }
  double w(const HermiteTable& he) const { return w_[0](he); }

  // G_{k+1} at the sample.
  double weight(const HermiteTable& he) const {
    double n[4] = {0, 0, 0, 0}, w[4] = {0, 0, 0, 0};
    for (int j = 0; j <= k_; ++j) n[j] = N_[j](he);
    for (int j = 0; j <= k_ + 1; ++j) w[j] = w_[j](he);
    switch (k_) {
      case 0:
        return n[0] / w[0] + w[1] / (w[0] * w[0]);
      case 1: {
        using S = Series<1>;
        const S Ns = S::from_derivatives(n), ws = S::from_derivatives(w), wd = S::from_derivatives(w + 1);
        const S G1 = Ns / ws + wd / (ws * ws);
        return G1.a[0] * G1.a[0] - G1.a[1] / w[0];
      }
      default: {
        using S = Series<2>;
        const S Ns = S::from_derivatives(n), ws = S::from_derivatives(w), wd = S::from_derivatives(w + 1);
        const S G1 = Ns / ws + wd / (ws * ws);
        const S G2 = G1 * G1 - G1.deriv() / ws;
        return G2.a[0] * G1.a[0] - G2.a[1] / w[0];
      }
    }
  }

 private:
  int k_;
  int dim_ = 1, maxdeg_ = 1;
  CompiledChaos F_;
  std::vector<CompiledChaos> N_, w_;
};

inline constexpr double kMinMalliavinNorm = 1e-12;

// Estimates p^{(k)}_{F+alpha}(x) for each x.
inline std::vector<McEstimate> density_malliavin(const ChaosVector& F, double alpha, int k,
                                                 const std::vector<double>& xs, const McConfig& cfg) {
  require(!xs.empty(), "density_malliavin: empty grid");
  const MalliavinWeights W(F, k);
  const double sign = k % 2 ? -1.0 : 1.0;
  return run_mc(cfg, xs.size(), [&] {
    return [&, he = HermiteTable(W.dim(), W.maxdeg()), z = std::vector<double>(W.dim())](Stream& s,
                                                                                          double* out) mutable {
      for (auto& v : z) v = s.normal();
      he.fill(z.data());
      if (!(W.w(he) >= kMinMalliavinNorm)) return false;
      const double Y = W.value(he) + alpha;
      const double G = sign * W.weight(he);
      for (std::size_t i = 0; i < xs.size(); ++i) out[i] = Y > xs[i] ? G : 0.0;
      return true;
    };
  });
}

// Gaussian kernel density estimate of F + alpha.
inline std::vector<McEstimate> density_kde(const ChaosVector& F, double alpha, const std::vector<double>& xs,
                                           double bandwidth, const McConfig& cfg) {
  require(bandwidth > 0.0 && std::isfinite(bandwidth), "density_kde: bandwidth must be positive");
  require(!xs.empty(), "density_kde: empty grid");
  const CompiledChaos C(F);
  const double norm = 1.0 / (bandwidth * std::sqrt(2 * M_PI));
  return run_mc(cfg, xs.size(), [&] {
    return [&, he = HermiteTable(F.dim(), std::max(1, C.maxdeg())), z = std::vector<double>(F.dim())](
               Stream& s, double* out) mutable {
      for (auto& v : z) v = s.normal();
      he.fill(z.data());
      const double Y = C(he) + alpha;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double u = (xs[i] - Y) / bandwidth;
        out[i] = norm * std::exp(-0.5 * u * u);
      }
      return true;
    };
  });
}

// Exact density of alpha + sum zeta_j (z_j^2 - 1) by Fourier inversion of
//   phi(t) = prod (1 - 2 i zeta_j t)^{-1/2},  Y = c + S,  c = alpha - sum zeta.
// With smoothing h > 0 returns the density convolved with N(0, h^2), i.e. the
// exact expectation of a Gaussian KDE with bandwidth h. Each value is computed
// at two tolerances that must agree to 1e-6.
inline std::vector<double> density_cf_oracle(const SecondChaosSpec& spec, const std::vector<double>& xs,
                                             double smoothing = 0.0) {
  spec.validate();
  require(smoothing >= 0.0 && std::isfinite(smoothing), "density_cf_oracle: smoothing must be non-negative");
  const double c = spec.alpha - spec.zeta_sum();
  const auto& zeta = spec.zeta;
  const double h2 = smoothing * smoothing;
  auto R = [&](double t) {
    double lr = -0.5 * h2 * t * t;
    for (double z : zeta) lr -= 0.25 * std::log1p(4 * z * z * t * t);
    return std::exp(lr);
  };
  auto theta = [&](double t) {
    double th = 0.0;
    for (double z : zeta) th += 0.5 * std::atan(2 * z * t);
    return th;
  };
  auto fc = [&](double t) { return R(t) * std::cos(theta(t)); };
  auto fs = [&](double t) { return R(t) * std::sin(theta(t)); };

  auto eval = [&](double omega, double tol) {
    if (omega == 0.0) {
      boost::math::quadrature::exp_sinh<double> q;
      return q.integrate(fc, tol) / M_PI;
    }
    boost::math::quadrature::ooura_fourier_cos<double> qc(tol);
    boost::math::quadrature::ooura_fourier_sin<double> qs(tol);
    const double a = qc.integrate(fc, omega).first;
    const double b = qs.integrate(fs, omega).first;
    return (a + b) / M_PI;
  };

  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) {
    const double omega = x - c;
    if (smoothing == 0.0 && omega <= 0.0) {
      out.push_back(0.0);
      continue;
    }
    const double p1 = eval(omega, 1e-8), p2 = eval(omega, 1e-11);
    if (!std::isfinite(p2) || std::abs(p1 - p2) > 1e-6 * std::max(1.0, std::abs(p2))) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "density_cf_oracle: no convergence at x = %.6g (%.10g vs %.10g)", x, p1, p2);
      throw NumericalError(buf);
    }
    out.push_back(smoothing == 0.0 ? std::max(0.0, p2) : p2);
  }
  return out;
}

}  // namespace gammachaos
