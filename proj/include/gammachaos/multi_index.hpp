#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace gammachaos {

// Sorted multiset of basis labels.
using MultiIndex = std::vector<std::uint16_t>;

inline double factorial(int n) {
  static const auto table = [] {
    std::array<double, 171> t{};
    t[0] = 1.0;
    for (int i = 1; i < 171; ++i) t[i] = t[i - 1] * i;
    return t;
  }();
  if (n < 0 || n > 170) throw NumericalError("factorial out of range");
  return table[n];
}

inline double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

struct Run {
  std::uint16_t label;
  int count;
};

inline std::vector<Run> runs(const MultiIndex& m) {
  std::vector<Run> out;
  for (auto v : m) {
    if (!out.empty() && out.back().label == v)
      ++out.back().count;
    else
      out.push_back({v, 1});
  }
  return out;
}

// Product of the count factorials, a! = prod_i a_i!.
inline double count_factorial(const MultiIndex& m) {
  double r = 1.0;
  for (const auto& run : runs(m)) r *= factorial(run.count);
  return r;
}

// Number of distinct orderings of the multiset.
inline double multiplicity(const MultiIndex& m) {
  return factorial(static_cast<int>(m.size())) / count_factorial(m);
}

inline bool is_sorted_index(const MultiIndex& m) {
  return std::is_sorted(m.begin(), m.end());
}

inline MultiIndex merge(const MultiIndex& a, const MultiIndex& b) {
  MultiIndex out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline MultiIndex with_label(const MultiIndex& a, std::uint16_t j) {
  MultiIndex out(a);
  out.insert(std::upper_bound(out.begin(), out.end(), j), j);
  return out;
}

// Multiset difference a - b; b must be contained in a.
inline MultiIndex remove(const MultiIndex& a, const MultiIndex& b) {
  MultiIndex out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline MultiIndex from_runs(const std::vector<Run>& rs) {
  MultiIndex out;
  for (const auto& r : rs) out.insert(out.end(), r.count, r.label);
  return out;
}

// All sorted multi-indices of length q over labels [0, d).
inline void for_each_multiset(int d, int q, const std::function<void(const MultiIndex&)>& fn) {
  MultiIndex m(q, 0);
  if (q == 0) {
    fn(m);
    return;
  }
  if (d <= 0) return;
  while (true) {
    fn(m);
    int i = q - 1;
    while (i >= 0 && m[i] == d - 1) --i;
    if (i < 0) break;
    std::uint16_t v = m[i] + 1;
    for (int j = i; j < q; ++j) m[j] = v;
  }
}

inline std::size_t multiset_count(int d, int q) {
  return static_cast<std::size_t>(binom(d + q - 1, q));
}

// All sub-multisets of m, paired with their complements.
inline void for_each_submultiset(const MultiIndex& m,
                                 const std::function<void(const MultiIndex&, const MultiIndex&)>& fn) {
  auto rs = runs(m);
  std::vector<int> k(rs.size(), 0);
  while (true) {
    MultiIndex sub, rest;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      sub.insert(sub.end(), k[i], rs[i].label);
      rest.insert(rest.end(), rs[i].count - k[i], rs[i].label);
    }
    fn(sub, rest);
    std::size_t i = 0;
    while (i < rs.size() && k[i] == rs[i].count) k[i++] = 0;
    if (i == rs.size()) break;
    ++k[i];
  }
}

}  // namespace gammachaos
