#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"

namespace gammachaos {

// Probabilists' monic Hermite polynomial He_n.
inline double hermite_eval(int n, double x) {
  require(n >= 0, "hermite_eval: negative degree");
  if (n == 0) return 1.0;
  double prev = 1.0, cur = x;
  for (int k = 1; k < n; ++k) {
    double next = x * cur - k * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

// out[0..nmax] = He_0(x) .. He_nmax(x)
inline void hermite_table(double x, int nmax, double* out) {
  out[0] = 1.0;
  if (nmax >= 1) out[1] = x;
  for (int k = 1; k < nmax; ++k) out[k + 1] = x * out[k] - k * out[k - 1];
}

// Univariate polynomial, coefficients by degree, trailing zeros stripped.
class Poly {
 public:
  Poly() = default;
  explicit Poly(std::vector<double> c) : c_(std::move(c)) { normalize(); }
  static Poly constant(double v) { return Poly({v}); }
  static Poly identity() { return Poly({0.0, 1.0}); }

  const std::vector<double>& coeffs() const { return c_; }
  int degree() const { return c_.empty() ? -1 : static_cast<int>(c_.size()) - 1; }
  double coeff(int i) const { return i < static_cast<int>(c_.size()) ? c_[i] : 0.0; }

  double operator()(double x) const {
    double r = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) r = r * x + *it;
    return r;
  }

  Poly derivative() const {
    if (c_.size() <= 1) return {};
    std::vector<double> d(c_.size() - 1);
    for (std::size_t i = 1; i < c_.size(); ++i) d[i - 1] = c_[i] * static_cast<double>(i);
    return Poly(d);
  }

  friend Poly operator+(const Poly& a, const Poly& b) {
    std::vector<double> r(std::max(a.c_.size(), b.c_.size()), 0.0);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = a.coeff(int(i)) + b.coeff(int(i));
    return Poly(r);
  }
  friend Poly operator-(const Poly& a, const Poly& b) { return a + (-1.0) * b; }
  friend Poly operator*(double s, const Poly& a) {
    std::vector<double> r(a.c_);
    for (auto& v : r) v *= s;
    return Poly(r);
  }
  friend Poly operator*(const Poly& a, const Poly& b) {
    if (a.c_.empty() || b.c_.empty()) return {};
    std::vector<double> r(a.c_.size() + b.c_.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.c_.size(); ++i)
      for (std::size_t j = 0; j < b.c_.size(); ++j) r[i + j] += a.c_[i] * b.c_[j];
    return Poly(r);
  }

 private:
  void normalize() {
    while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
  }
  std::vector<double> c_;
};

// Rodrigues polynomial x^{-b} e^x / n! (d/dx)^n (e^{-x} x^{n+b}), i.e. the
// generalized Laguerre polynomial with parameter b, via the three-term recurrence.
inline double laguerre_eval(int n, double b, double x) {
  require(n >= 0, "laguerre_eval: negative degree");
  if (n == 0) return 1.0;
  double prev = 1.0, cur = 1.0 + b - x;
  for (int k = 1; k < n; ++k) {
    double next = ((2.0 * k + 1.0 + b - x) * cur - (k + b) * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

inline Poly laguerre_poly(int n, double b) {
  require(n >= 0, "laguerre_poly: negative degree");
  Poly prev = Poly::constant(1.0);
  if (n == 0) return prev;
  Poly cur({1.0 + b, -1.0});
  for (int k = 1; k < n; ++k) {
    Poly next = (1.0 / (k + 1.0)) * (Poly({2.0 * k + 1.0 + b, -1.0}) * cur - (k + b) * prev);
    prev = cur;
    cur = next;
  }
  return cur;
}

}  // namespace gammachaos
