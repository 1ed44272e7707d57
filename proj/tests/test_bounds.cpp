#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gammachaos/bounds.hpp"
#include "test_util.hpp"

using namespace gammachaos;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Fixed q = 4 kernel on two coordinates; reference values from an independent
// symbolic computation (polynomial differentiation and Gaussian moments).
SymTensor fixed_q4_kernel() {
  SymTensor f(4, 2);
  f.set({0, 0, 0, 0}, 0.3);
  f.set({0, 0, 1, 1}, 0.2);
  f.set({0, 1, 1, 1}, -0.1);
  f.set({1, 1, 1, 1}, 0.15);
  return f;
}

double diag_theta_var(const std::vector<double>& zeta) {
  double s = 0.0;
  for (double z : zeta) s += (2 * z * z - z) * (2 * z * z - z);
  return 8 * s;
}

std::vector<double> perturbed_zeta() {
  std::vector<double> z(12, 0.5);
  z[0] = 0.6;
  return z;
}

double sum_sq(const std::vector<double>& z) {
  double s = 0.0;
  for (double v : z) s += 2 * v * v;
  return s;
}

}  // namespace

TEST(Constants, LambdaValues) {
  EXPECT_DOUBLE_EQ(lambda_const(2, 1, 2), 1.0);
  EXPECT_DOUBLE_EQ(lambda_const(2, 1, 4), 0.5);
  EXPECT_DOUBLE_EQ(lambda_const(2, 1, 6), 1.0 / 3.0);
  EXPECT_THROW(lambda_const(1, 1, 4), ValidationError);
  EXPECT_THROW(lambda_const(4, 1, 4), ValidationError);
  EXPECT_THROW(lambda_const(2, 1, 3), PreconditionError);
}

TEST(Constants, LambdaRecursion) {
  for (int q = 2; q <= 8; q += 2)
    for (int k = 1; k <= q / 2; ++k)
      for (int l = 1; l <= q / 2; ++l) {
        if (k + l < 3) continue;
        const double lhs = 1 / lambda_const(k + 1, l, q) + 1 / lambda_const(k, l + 1, q);
        EXPECT_NEAR(lhs, 1 / lambda_const(k, l, q), 1e-12 * std::abs(lhs)) << q << " " << k << " " << l;
      }
}

TEST(Constants, TauAtHalfOrder) {
  for (int q = 2; q <= 8; q += 2)
    for (int k = 2; k <= q / 2 + 1; ++k)
      for (int l = 1; l <= k; ++l) {
        if (k + l < 3) continue;
        const double lhs = tau_const(k, l, q / 2 - 1, q) * lambda_const(k, l, q);
        const double rhs = factorial(q) * half_contraction_coeff(q) / factorial(q - k - l + 2);
        EXPECT_NEAR(lhs, rhs, 1e-12 * rhs);
      }
}

TEST(Constants, C1) {
  EXPECT_DOUBLE_EQ(c1_constant(2), 2.0);
  EXPECT_DOUBLE_EQ(c1_constant(4), 6.0);
  for (int q = 2; q <= 10; q += 2) EXPECT_GE(c1_constant(q), 1.0);
}

TEST(Theta, TightCaseVanishes) {
  const auto F = testutil::second_chaos(std::vector<double>(12, 0.5));
  const auto T = theta(F, 6.0);
  EXPECT_TRUE(T.kernels().empty());
  EXPECT_NEAR(T.constant(), 0.0, 1e-14);
}

TEST(Theta, DiagonalVarianceAndMean) {
  const auto z = perturbed_zeta();
  const auto F = testutil::second_chaos(z);
  const auto T = theta(F, sum_sq(z));
  EXPECT_NEAR(expectation(T), 0.0, 1e-12);
  EXPECT_NEAR(expect_product(T, T), diag_theta_var(z), 1e-12);
  EXPECT_THROW(theta(ChaosVector(3, 1.0), 1.0), ValidationError);
}

TEST(Expansions, SecondChaosClosedForms) {
  const std::vector<double> z = {0.9, 0.4, 0.3, 0.1};
  const auto f = diagonal_tensor(z);
  const double a = sum_sq(z), t = diag_theta_var(z);
  EXPECT_NEAR(lemma51_rhs(f, a), t, 1e-12);
  EXPECT_NEAR(lemma52_rhs(f), 2 * t, 1e-12);
  EXPECT_NEAR(lemma52_direct(f), 2 * t, 1e-12);
  EXPECT_NEAR(lemma54_rhs(f, 2, 1), t / 2, 1e-12);
  EXPECT_NEAR(lemma54_direct(f, 2, 1), t / 2, 1e-12);
  EXPECT_THROW(lemma51_rhs(f, a + 0.1), PreconditionError);
}

TEST(Expansions, FixedQuarticKernelMatchesSymbolicOracle) {
  const auto f = fixed_q4_kernel();
  const double a = 9.42;
  EXPECT_NEAR(factorial(4) * f.norm2(), a, 1e-12);
  EXPECT_LT(rel_err(lemma51_rhs(f, a), 68685.0432), 1e-10);
  EXPECT_LT(rel_err(lemma52_direct(f), 16 * 17306.7504), 1e-10);
  EXPECT_LT(rel_err(lemma52_rhs(f), 16 * 17306.7504), 1e-10);
  const struct {
    int k, l;
    double v;
  } ref[] = {{2, 1, 17306.7504}, {2, 2, 56859.9228}, {3, 1, 71678.9376}, {3, 2, 154481.4432}, {3, 3, 187852.1472}};
  for (const auto& r : ref) {
    EXPECT_LT(rel_err(lemma54_direct(f, r.k, r.l), r.v), 1e-10) << r.k << r.l;
    EXPECT_LT(rel_err(lemma54_expansion(f, r.k, r.l), r.v), 1e-10) << r.k << r.l;
  }
  const auto F = ChaosVector::from_kernel(f);
  EXPECT_LT(rel_err(moment(F, 3), 313.416), 1e-10);
  EXPECT_LT(rel_err(moment(F, 4), 31961.4012), 1e-10);
}

// The displayed form for general (k, l) drops the cross terms created by
// symmetrising over all variables; it is exact only for (2, 1).
TEST(Expansions, DisplayedFormUndershootsOffDiagonalPairs) {
  const auto f = fixed_q4_kernel();
  EXPECT_LT(rel_err(lemma54_rhs(f, 2, 1), lemma54_direct(f, 2, 1)), 1e-10);
  for (auto [k, l] : {std::pair{2, 2}, {3, 1}, {3, 2}, {3, 3}}) EXPECT_LT(lemma54_rhs(f, k, l), lemma54_direct(f, k, l));
}

TEST(Expansions, RandomKernels) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    const int d = 2 + t % 5;
    const auto f = random_sym_tensor(2, d, rng, 0.4);
    const double a = 2 * f.norm2();
    const auto F = ChaosVector::from_kernel(f);
    const auto T = theta(F, a);
    const double tv = expect_product(T, T);
    EXPECT_LT(rel_err(lemma51_rhs(f, a), tv), 1e-10);
    EXPECT_LT(rel_err(lemma52_rhs(f), lemma52_direct(f)), 1e-10);
    EXPECT_LT(rel_err(lemma54_rhs(f, 2, 1), lemma54_direct(f, 2, 1)), 1e-10);
    EXPECT_LE(lemma52_direct(f), c1_constant(2) * tv * (1 + 1e-10));
    EXPECT_TRUE(dtheta_identity_check(f));
  }
  for (int t = 0; t < 5; ++t) {
    const int d = 2 + t % 3;
    const auto f = random_sym_tensor(4, d, rng, 0.3);
    const double a = factorial(4) * f.norm2();
    const auto F = ChaosVector::from_kernel(f);
    const auto T = theta(F, a);
    const double tv = expect_product(T, T);
    EXPECT_LT(rel_err(lemma51_rhs(f, a), tv), 1e-10);
    EXPECT_LT(rel_err(lemma52_rhs(f), lemma52_direct(f)), 1e-10);
    EXPECT_LE(lemma52_direct(f), c1_constant(4) * tv * (1 + 1e-10));
    for (auto [k, l] : {std::pair{2, 1}, {2, 2}, {3, 1}, {3, 2}, {3, 3}})
      EXPECT_LT(rel_err(lemma54_expansion(f, k, l), lemma54_direct(f, k, l)), 1e-10) << k << l;
    EXPECT_TRUE(dtheta_identity_check(f));
  }
}

TEST(LambdaField, ShapeAndTightCase) {
  const auto F = testutil::second_chaos(std::vector<double>(5, 0.5));
  const auto L = lambda_field(F, 2, 1);
  EXPECT_EQ(L.comp.size(), 5u);
  for (const auto& c : L.comp) EXPECT_TRUE(c.kernels().empty() && std::abs(c.constant()) < 1e-14);
  std::mt19937_64 rng(3);
  const auto G = ChaosVector::from_kernel(random_sym_tensor(4, 3, rng));
  EXPECT_EQ(lambda_field(G, 3, 2).comp.size(), multiset_count(3, 2) * multiset_count(3, 1));
  EXPECT_THROW(lambda_field(G, 4, 1), ValidationError);
}

TEST(LambdaField, DerivativeRecursion) {
  // D Lambda(k,l) = lambda(k,l)/lambda(k+1,l) Lambda(k+1,l) + lambda(k,l)/lambda(k,l+1) Lambda(k,l+1)
  std::mt19937_64 rng(5);
  const int q = 4, d = 2;
  const auto F = ChaosVector::from_kernel(random_sym_tensor(q, d, rng, 0.5));
  const auto L21 = lambda_field(F, 2, 1), L31 = lambda_field(F, 3, 1), L22 = lambda_field(F, 2, 2);
  const double a = lambda_const(2, 1, q) / lambda_const(3, 1, q), b = lambda_const(2, 1, q) / lambda_const(2, 2, q);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      // entry (i, j) of D Lambda(2,1): derivative direction j of component i
      const auto lhs = malliavin_component(L21.at(i, 0), j);
      const MultiIndex ij{std::uint16_t(std::min(i, j)), std::uint16_t(std::max(i, j))};
      std::size_t a_idx = 0;
      while (L31.A[a_idx] != ij) ++a_idx;
      const auto rhs = a * L31.at(a_idx, 0) + b * L22.at(i, j);
      EXPECT_TRUE(approx_equal(lhs, rhs, 1e-10));
    }
}

TEST(CConstant, EmpiricalDomination) {
  std::mt19937_64 rng(17);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto f = random_sym_tensor(4, 2 + t % 2, rng, 0.3);
    const double th = lemma51_rhs(f, factorial(4) * f.norm2());
    EXPECT_LE(lemma52_direct(f), c1_constant(4) * th * (1 + 1e-10));
    for (auto [k, l] : {std::pair{2, 1}, {2, 2}, {3, 1}, {3, 2}, {3, 3}})
      worst = std::max(worst, lemma54_direct(f, k, l) / (c_constant(4, k, l) * th));
  }
  RecordProperty("worst_ratio", std::to_string(worst));
  EXPECT_LE(worst, 1.0);
  EXPECT_NEAR(c_constant(4, 2, 1), c1_constant(4) / 16, 1e-12);
}

TEST(FourthMoment, TightCaseIsZero) {
  const auto F = testutil::second_chaos(std::vector<double>(12, 0.5));
  EXPECT_NEAR(fourth_moment_combo(F, 6.0), 0.0, 1e-10);
}

TEST(FourthMoment, DominatesThetaVariance) {
  const auto z = perturbed_zeta();
  const auto F = testutil::second_chaos(z);
  const double a = sum_sq(z), c = fourth_moment_combo(F, a);
  EXPECT_GT(c, 0.0);
  EXPECT_GE(c * 4 / 3.0, diag_theta_var(z) * (1 - 1e-12));
  EXPECT_THROW(fourth_moment_combo(F, a + 1), PreconditionError);

  std::mt19937_64 rng(23);
  for (int t = 0; t < 10; ++t) {
    const int q = t < 7 ? 2 : 4;
    const auto f = random_sym_tensor(q, 3, rng, 0.4);
    const auto G = ChaosVector::from_kernel(f);
    const double al = factorial(q) * f.norm2();
    const auto T = theta(G, al);
    EXPECT_LE(expect_product(T, T), q * q / 3.0 * fourth_moment_combo(G, al) * (1 + 1e-10) + 1e-10);
  }
}

TEST(Precheck, SecondChaosCriterion) {
  const auto z = perturbed_zeta();
  auto c = negative_moment_precheck(testutil::second_chaos(z), sum_sq(z));
  EXPECT_TRUE(c.ok);
  EXPECT_EQ(c.positive, 12);
  EXPECT_NEAR(c.zeta.front(), 0.6, 1e-12);
  // too few coefficients
  c = negative_moment_precheck(testutil::second_chaos(std::vector<double>(6, 0.5)), 3.0);
  EXPECT_FALSE(c.ok);
  // alpha below the coefficient sum
  const std::vector<double> big(10, 0.2);
  c = negative_moment_precheck(testutil::second_chaos(big), sum_sq(big));
  EXPECT_FALSE(c.ok);
  // rotation invariance: eigenvalues, not the diagonal, decide
  SymTensor f(2, 10);
  for (int i = 0; i < 10; ++i) f.set({std::uint16_t(i), std::uint16_t(i)}, 0.5);
  f.set({0, 1}, 0.6);
  c = negative_moment_precheck(ChaosVector::from_kernel(f), 100.0);
  EXPECT_FALSE(c.ok);  // eigenvalue 0.5 - 0.6 < 0
  // other chaoses: warning only
  std::mt19937_64 rng(1);
  c = negative_moment_precheck(ChaosVector::from_kernel(random_sym_tensor(4, 2, rng)), 1.0);
  EXPECT_TRUE(c.ok);
  EXPECT_FALSE(c.warnings.empty());
}

TEST(Thm11, TightCaseBoundIsZero) {
  const auto F = testutil::second_chaos(std::vector<double>(12, 0.5));
  McConfig cfg;
  cfg.n = 20000;
  const auto rep = assemble_bound_thm11(F, 6.0, {-1.0, 0.0, 2.0, 6.0}, cfg);
  EXPECT_EQ(rep.radical, 0.0);
  for (const auto& p : rep.points) {
    EXPECT_EQ(p.bound, 0.0);
    EXPECT_TRUE(std::isfinite(p.P));
  }
}

TEST(Thm11, PerturbedDominatesDensityGap) {
  const auto z = perturbed_zeta();
  const auto F = testutil::second_chaos(z);
  const double a = sum_sq(z);
  McConfig cfg;
  cfg.n = 100000;
  const std::vector<double> xs = {2.0, 4.0, 6.0, 8.0};
  const auto rep = assemble_bound_thm11(F, a, xs, cfg);
  const auto dens = density_malliavin(F, a, 0, xs, cfg);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double gap = std::abs(dens[i].value - gamma_pdf(GammaTarget(a), xs[i]));
    EXPECT_LE(gap, rep.points[i].bound + 4 * dens[i].stderr_);
    EXPECT_GT(rep.points[i].bound, 0.0);
  }
  EXPECT_GE(rep.radical * rep.radical, rep.theta_var * (1 - 1e-12));
}

TEST(Thm11, Refusals) {
  McConfig cfg;
  cfg.n = 1000;
  const auto few = testutil::second_chaos({0.5, 0.5, 0.5, 0.4});
  EXPECT_THROW(assemble_bound_thm11(few, sum_sq({0.5, 0.5, 0.5, 0.4}), {1.0}, cfg), PreconditionError);
  // x = 0 needs alpha > 1
  const std::vector<double> small(10, 0.2);
  EXPECT_THROW(assemble_bound_thm11(testutil::second_chaos(small), sum_sq(small), {0.0}, cfg), PreconditionError);
  // odd order
  std::mt19937_64 rng(2);
  const auto f3 = random_sym_tensor(3, 2, rng);
  EXPECT_THROW(assemble_bound_thm11(ChaosVector::from_kernel(f3), 6 * f3.norm2(), {1.0}, cfg), PreconditionError);
  // alpha mismatch
  const auto z = perturbed_zeta();
  EXPECT_THROW(assemble_bound_thm11(testutil::second_chaos(z), 1.0, {1.0}, cfg), PreconditionError);
}

TEST(Thm12, DerivativeBoundsDominate) {
  const auto z = perturbed_zeta();
  const auto F = testutil::second_chaos(z);
  const double a = sum_sq(z);
  McConfig cfg;
  cfg.n = 100000;
  const std::vector<double> xs = {3.0, 6.0};
  for (int k = 1; k <= 2; ++k) {
    const auto rep = assemble_bound_thm12(F, a, k, xs, cfg);
    const auto dens = density_malliavin(F, a, k, xs, cfg);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double gap = std::abs(dens[i].value - gamma_pdf_deriv(GammaTarget(a), k, xs[i]));
      EXPECT_LE(gap, rep.points[i].bound + 4 * dens[i].stderr_) << k << " " << xs[i];
    }
  }
  const auto tight = assemble_bound_thm12(testutil::second_chaos(std::vector<double>(12, 0.5)), 6.0, 1, xs, cfg);
  for (const auto& p : tight.points) EXPECT_EQ(p.bound, 0.0);
  EXPECT_NEAR(tight.negative_moments.at("E[T^2]").value, 0.0, 1e-18);
}

TEST(Thm61, SecondChaosMatchesStructure) {
  const auto z = perturbed_zeta();
  const auto F = testutil::second_chaos(z);
  const double a = sum_sq(z);
  McConfig cfg;
  cfg.n = 50000;
  const auto rep = assemble_bound_thm61(F, a, 8, {3.0, 6.0}, cfg);
  EXPECT_NEAR(rep.exact_moments.at("E[wbar]"), a, 1e-12);
  EXPECT_NEAR(1 / rep.p_exp + 2 / rep.r_exp + 3.0 / rep.s, 1.0, 1e-14);
  // on the second chaos wbar = w/2, so Dwbar - DF = Theta-type control: E||.||^2 = E[Theta^2]/4 ... via Poincare
  EXPECT_GE(rep.R_s * rep.R_s, diag_theta_var(z) / 4 * (1 - 1e-12));
  for (const auto& p : rep.points) EXPECT_TRUE(std::isfinite(p.bound) && p.bound > 0);
}

TEST(Thm61, MixedChaosDominates) {
  // sum_i (1/2 + 6b) He2(z_i) + b He4(z_i)
  const int d = 26;
  const double b = 0.02;
  ChaosVector F(d, 0.0);
  SymTensor f2(2, d), f4(4, d);
  for (int i = 0; i < d; ++i) {
    const auto u = std::uint16_t(i);
    f2.set({u, u}, 0.5 + 6 * b);
    f4.set({u, u, u, u}, b);
  }
  F.add_kernel(f2);
  F.add_kernel(f4);
  const double a = d * (0.5 + 12 * b + 96 * b * b);
  EXPECT_NEAR(variance(F), a, 1e-10);
  // wbar = 2 sum z^2 (1/2 + 2b z^2)(1/2 + 3b + b z^2)
  const auto wbar = -1.0 * carre_du_champ(F, inverse_L(F));
  std::mt19937_64 rng(9);
  for (int t = 0; t < 5; ++t) {
    const auto zz = testutil::random_point(d, rng);
    double ref = 0.0;
    for (double v : zz) ref += 2 * v * v * (0.5 + 2 * b * v * v) * (0.5 + 3 * b + b * v * v);
    EXPECT_NEAR(eval(wbar, zz), ref, 1e-9 * ref);
  }
  McConfig cfg;
  cfg.n = 50000;
  const std::vector<double> xs = {a / 2, a, 2 * a};
  const auto rep = assemble_bound_thm61(F, a, 8, xs, cfg);
  const auto dens = density_malliavin(F, a, 0, xs, cfg);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double gap = std::abs(dens[i].value - gamma_pdf(GammaTarget(a), xs[i]));
    EXPECT_LE(gap, rep.points[i].bound + 4 * dens[i].stderr_);
  }
  EXPECT_FALSE(rep.warnings.empty());
  EXPECT_THROW(assemble_bound_thm61(F, a, 6, xs, cfg), ValidationError);
}

TEST(Thm61, WorkerInvariance) {
  const auto z = perturbed_zeta();
  const auto F = testutil::second_chaos(z);
  McConfig c1, c4;
  c1.n = c4.n = 40000;
  c1.chunk_size = c4.chunk_size = 4096;
  c4.workers = 4;
  const auto r1 = assemble_bound_thm11(F, sum_sq(z), {2.0, 5.0}, c1);
  const auto r4 = assemble_bound_thm11(F, sum_sq(z), {2.0, 5.0}, c4);
  for (std::size_t i = 0; i < r1.points.size(); ++i) EXPECT_EQ(r1.points[i].bound, r4.points[i].bound);
}
