#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace gammachaos {

struct McConfig {
  std::uint64_t n = 100000;
  std::uint64_t seed = 20240601;
  std::uint64_t chunk_size = 1u << 14;
  int workers = 1;
};

// Value with standard error and provenance.
struct McEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  std::uint64_t chunk_size = 0;
  std::uint64_t nonfinite = 0;
  std::uint64_t rejected = 0;
  double max_share = 0.0;  // largest |sample| / sum |sample|
  bool unstable = false;

  bool within(double target, double sigmas = 4.0, double slack = 0.0) const {
    return std::abs(value - target) <= sigmas * stderr_ + slack;
  }
};

inline constexpr double kHeavyTailShare = 0.05;

// Streaming mean/variance; merged with Chan's update in a fixed order.
struct Accumulator {
  std::uint64_t n = 0;
  double mean = 0.0, m2 = 0.0, sum_abs = 0.0, max_abs = 0.0;
  std::uint64_t nonfinite = 0, rejected = 0;

  void push(double v) {
    if (!std::isfinite(v)) {
      ++nonfinite;
      return;
    }
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
    sum_abs += std::abs(v);
    max_abs = std::max(max_abs, std::abs(v));
  }

  void merge(const Accumulator& o) {
    nonfinite += o.nonfinite;
    rejected += o.rejected;
    sum_abs += o.sum_abs;
    max_abs = std::max(max_abs, o.max_abs);
    if (o.n == 0) return;
    if (n == 0) {
      n = o.n;
      mean = o.mean;
      m2 = o.m2;
      return;
    }
    const double na = static_cast<double>(n), nb = static_cast<double>(o.n), nt = na + nb;
    const double delta = o.mean - mean;
    mean += delta * nb / nt;
    m2 += o.m2 + delta * delta * na * nb / nt;
    n += o.n;
  }

  McEstimate estimate(const McConfig& cfg) const {
    McEstimate e;
    e.value = mean;
    e.n = n;
    e.stderr_ = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    e.seed = cfg.seed;
    e.chunk_size = cfg.chunk_size;
    e.nonfinite = nonfinite;
    e.rejected = rejected;
    e.max_share = sum_abs > 0.0 ? max_abs / sum_abs : 0.0;
    e.unstable = e.max_share > kHeavyTailShare || nonfinite > 0;
    return e;
  }
};

// Runs cfg.n samples in fixed-size chunks. make_sampler() is called once per
// worker and must return a callable bool(Stream&, double* out) that fills k
// values for one sample (false = sample rejected). Chunk c always uses
// substream c and chunks are merged in index order, so the result does not
// depend on the worker count.
template <class Factory>
std::vector<McEstimate> run_mc(const McConfig& cfg, std::size_t k, Factory make_sampler) {
  require(cfg.n >= 2, "Monte Carlo: need at least two samples");
  require(cfg.chunk_size >= 1, "Monte Carlo: chunk size must be positive");
  require(cfg.workers >= 1, "Monte Carlo: worker count must be positive");
  const std::uint64_t chunks = (cfg.n + cfg.chunk_size - 1) / cfg.chunk_size;
  std::vector<std::vector<Accumulator>> per_chunk(chunks, std::vector<Accumulator>(k));
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;

  auto work = [&] {
    try {
      auto sampler = make_sampler();
      std::vector<double> out(k);
      for (std::uint64_t c = next++; c < chunks; c = next++) {
        Stream s = Stream::substream(cfg.seed, c);
        auto& acc = per_chunk[c];
        const std::uint64_t m = std::min(cfg.chunk_size, cfg.n - c * cfg.chunk_size);
        for (std::uint64_t i = 0; i < m; ++i) {
          if (sampler(s, out.data())) {
            for (std::size_t j = 0; j < k; ++j) acc[j].push(out[j]);
          } else {
            for (auto& a : acc) ++a.rejected;
          }
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mu);
      if (!err) err = std::current_exception();
      next = chunks;
    }
  };

  const int nthreads = static_cast<int>(std::min<std::uint64_t>(cfg.workers, chunks));
  if (nthreads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (err) std::rethrow_exception(err);

  std::vector<Accumulator> total(k);
  for (const auto& chunk : per_chunk)
    for (std::size_t j = 0; j < k; ++j) total[j].merge(chunk[j]);
  std::vector<McEstimate> est;
  est.reserve(k);
  for (const auto& a : total) est.push_back(a.estimate(cfg));
  return est;
}

}  // namespace gammachaos
