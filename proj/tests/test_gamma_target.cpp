#include <cmath>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <gtest/gtest.h>

#include "gammachaos/gamma_target.hpp"

using namespace gammachaos;

TEST(GammaTarget, PdfValues) {
  EXPECT_NEAR(gamma_pdf(GammaTarget(1.0), 2.0), std::exp(-2.0), 1e-15);
  EXPECT_NEAR(gamma_pdf(GammaTarget(2.0), 1.0), std::exp(-1.0), 1e-15);
  EXPECT_EQ(gamma_pdf(GammaTarget(2.0), -1.0), 0.0);
  EXPECT_THROW(GammaTarget(0.0), ValidationError);
  EXPECT_THROW(GammaTarget(-1.0), ValidationError);
}

TEST(GammaTarget, PdfIntegratesToOne) {
  boost::math::quadrature::exp_sinh<double> integrator;
  for (double a : {0.7, 1.0, 2.5, 7.0, 30.0}) {
    GammaTarget t(a);
    const double s = integrator.integrate([&](double x) { return gamma_pdf(t, x); });
    EXPECT_NEAR(s, 1.0, 1e-8) << a;
  }
}

TEST(GammaTarget, DerivativeClosedForms) {
  GammaTarget t(2.0);
  for (double x : {0.1, 0.5, 1.0, 2.0, 5.0}) EXPECT_NEAR(gamma_pdf_deriv(t, 1, x), (1 - x) * std::exp(-x), 1e-14);
  GammaTarget t3(3.0);
  for (double x : {0.3, 1.7, 4.0}) EXPECT_DOUBLE_EQ(gamma_pdf_deriv(t3, 0, x), gamma_pdf(t3, x));
}

TEST(GammaTarget, DerivativeFiniteDifferences) {
  for (double a : {1.5, 3.0, 6.2}) {
    GammaTarget t(a);
    for (double x : {0.4, 1.0, 2.5, 6.0}) {
      const double h = 1e-4;
      const double fd1 = (gamma_pdf(t, x + h) - gamma_pdf(t, x - h)) / (2 * h);
      const double fd2 = (gamma_pdf(t, x + h) - 2 * gamma_pdf(t, x) + gamma_pdf(t, x - h)) / (h * h);
      EXPECT_NEAR(gamma_pdf_deriv(t, 1, x), fd1, 1e-6);
      EXPECT_NEAR(gamma_pdf_deriv(t, 2, x), fd2, 1e-6);
    }
  }
}

// p^(k) = x^{alpha-1-k} e^{-x} P_k(x) / Gamma(alpha); differentiate the polynomial part.
TEST(GammaTarget, DerivativeMatchesSymbolicDifferentiation) {
  for (double a : {0.5, 2.0, 3.5, 5.0}) {
    GammaTarget t(a);
    Poly P = Poly::constant(1.0);
    for (int k = 1; k <= 4; ++k) {
      const double beta = a - 1 - (k - 1);
      // d/dx [x^beta e^-x P] = x^{beta-1} e^-x (beta P - x P + x P')
      P = beta * P - Poly::identity() * P + Poly::identity() * P.derivative();
      std::vector<double> c(k + 1, 0.0);
      for (int i = 0; i <= k; ++i) c[k - i] = (k % 2 ? -1.0 : 1.0) * binom(k, i) * falling_shift(a, i);
      Poly expected(c);
      ASSERT_EQ(P.degree(), expected.degree());
      for (int i = 0; i <= k; ++i) EXPECT_NEAR(P.coeff(i), expected.coeff(i), 1e-12 * (1 + std::abs(expected.coeff(i))));
      for (double x : {0.7, 2.0, 4.5})
        EXPECT_NEAR(gamma_pdf_deriv(t, k, x), std::pow(x, a - 1 - k) * std::exp(-x) * P(x) / std::tgamma(a),
                    1e-12);
    }
  }
}

TEST(GammaTarget, DerivativeIntegratesToZero) {
  boost::math::quadrature::exp_sinh<double> integrator;
  for (double a : {3.5, 6.0})
    for (int k = 1; k <= 2; ++k) {
      GammaTarget t(a);
      const double s = integrator.integrate([&](double x) { return gamma_pdf_deriv(t, k, x); });
      EXPECT_NEAR(s, 0.0, 1e-8);
    }
}

TEST(GammaTarget, DerivativeAtOrigin) {
  EXPECT_EQ(gamma_pdf_deriv(GammaTarget(4.0), 2, 0.0), 0.0);
  EXPECT_THROW(gamma_pdf_deriv(GammaTarget(3.0), 2, 0.0), PreconditionError);
  EXPECT_THROW(gamma_pdf_deriv(GammaTarget(1.0), 0, 0.0), PreconditionError);
  EXPECT_EQ(gamma_pdf_deriv(GammaTarget(2.0), 3, -2.0), 0.0);
}

TEST(GammaTarget, NuFamily) {
  for (double a : {0.5, 2.0, 3.0}) {
    GammaTarget t(a);
    for (double y : {-2.0, 0.3, 1.0, 4.0}) EXPECT_NEAR(nu(t, 1, y), 1 + (1 - a) / y, 1e-14);
    EXPECT_EQ(nu(t, 3, 0.0), 0.0);
  }
}

// nu_{k+2} = -[nu_{k+1} + (1-alpha) nu_{k+1} / y - nu'_{k+1}] as Laurent polynomials.
TEST(GammaTarget, NuRecursion) {
  for (double a : {0.5, 2.0, 4.5}) {
    GammaTarget t(a);
    for (int k = 0; k <= 4; ++k) {
      auto c = nu_coefficients(t, k + 1);
      std::vector<double> r(c.size() + 1, 0.0);
      for (std::size_t i = 0; i < c.size(); ++i) {
        r[i] -= c[i];
        r[i + 1] -= (1 - a) * c[i];
        r[i + 1] -= static_cast<double>(i) * c[i];  // (c_i y^{-i})' = -i c_i y^{-i-1}
      }
      auto want = nu_coefficients(t, k + 2);
      ASSERT_EQ(want.size(), r.size());
      for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r[i], want[i], 1e-10 * (1 + std::abs(want[i])));
    }
  }
}

TEST(GammaTarget, LaguerreGenerator) {
  GammaTarget t(2.7);
  Poly L = laguerre_L(Poly::identity(), t);
  EXPECT_NEAR(L.coeff(0), 2.7, 1e-15);
  EXPECT_NEAR(L.coeff(1), -1.0, 1e-15);
  EXPECT_EQ(laguerre_L(Poly::constant(3.0), t).degree(), -1);
  for (int n = 0; n <= 10; ++n) {
    Poly Q = laguerre_poly(n, t.alpha - 1.0);
    Poly diff = laguerre_L(Q, t) + static_cast<double>(n) * Q;
    double scale = 0;
    for (double c : Q.coeffs()) scale = std::max(scale, std::abs(c));
    for (double c : diff.coeffs()) EXPECT_NEAR(c, 0.0, 1e-10 * (1 + n * scale)) << n;
  }
}

TEST(GammaTarget, LaguerreIntegrationByParts) {
  GammaTarget t(1.8);
  std::vector<Poly> ps = {Poly({1.0, -2.0, 0.5}), Poly({0.0, 1.0}), Poly({3.0, 0.0, 0.0, -0.25}),
                          laguerre_poly(4, 0.8)};
  for (const auto& F : ps)
    for (const auto& G : ps) {
      const double lhs = gamma_expect(t, G * laguerre_L(F, t));
      const double rhs = -gamma_expect(t, laguerre_carre(F, G));
      EXPECT_NEAR(lhs, rhs, 1e-8 * (1 + std::abs(rhs)));
    }
}

TEST(GammaTarget, RepresentationCheck) {
  McConfig cfg;
  cfg.n = 1000000;
  cfg.seed = 11;
  cfg.workers = 4;
  auto e = representation_check(GammaTarget(2.0), 0, 1.0, cfg);
  EXPECT_TRUE(e.within(std::exp(-1.0))) << e.value << " +- " << e.stderr_;
  GammaTarget t4(4.0);
  auto grid = representation_check(t4, 1, std::vector<double>{2.0, 5.0, -1.0}, cfg);
  EXPECT_TRUE(grid[0].within(gamma_pdf_deriv(t4, 1, 2.0))) << grid[0].value;
  EXPECT_TRUE(grid[1].within(gamma_pdf_deriv(t4, 1, 5.0))) << grid[1].value;
  EXPECT_EQ(grid[2].value, 0.0);
  EXPECT_EQ(grid[2].stderr_, 0.0);
  EXPECT_THROW(representation_check(GammaTarget(2.0), 1, 0.0, cfg), PreconditionError);
}

TEST(GammaTarget, DiffusionRepresentation) {
  McConfig cfg;
  cfg.n = 1000000;
  cfg.seed = 5;
  cfg.workers = 3;
  DiffusionSpec ou{[](double x) { return -x; }, [](double) { return std::sqrt(2.0); }, [](double) { return 0.0; }};
  auto e = diffusion_density_rep(ou, [](Stream& s) { return s.normal(); }, {0.0, 1.0}, cfg);
  EXPECT_TRUE(e[0].within(1 / std::sqrt(2 * M_PI))) << e[0].value;
  EXPECT_TRUE(e[1].within(std::exp(-0.5) / std::sqrt(2 * M_PI))) << e[1].value;

  GammaTarget t(3.0);
  auto sampler = [&](Stream& s) { return s.gamma(t.alpha); };
  DiffusionSpec lag{[&](double x) { return t.alpha - x; }, [](double x) { return std::sqrt(2 * x); },
                    [](double x) { return 1 / std::sqrt(2 * x); }, 0.0, INFINITY, true};
  DiffusionSpec lag_direct{[&](double x) { return t.alpha - x; }, [](double x) { return x; },
                           [](double) { return 1.0; }, 0.0, INFINITY, false};
  std::vector<double> xs = {0.8, 2.0, 4.0, -1.0};
  auto a = diffusion_density_rep(lag, sampler, xs, cfg);
  auto b = diffusion_density_rep(lag_direct, sampler, xs, cfg);
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    EXPECT_TRUE(a[i].within(gamma_pdf(t, xs[i]))) << a[i].value;
    EXPECT_NEAR(a[i].value, b[i].value, 1e-12);
  }
  // below the support the indicator always fires and the weight averages to zero
  EXPECT_TRUE(a[3].within(0.0)) << a[3].value;
}
