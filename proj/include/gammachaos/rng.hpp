#pragma once

#include <cmath>
#include <cstdint>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace gammachaos {

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based SplitMix64 stream. Substream c of master seed s is keyed by
// mix64(s ^ mix64(c)), so chunk c draws the same numbers on any thread.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}
  static Stream substream(std::uint64_t seed, std::uint64_t chunk) {
    return Stream(mix64(seed ^ mix64(chunk ^ 0xd1b54a32d192ed03ULL)));
  }

  std::uint64_t next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++ctr_); }

  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  // Inverse-CDF normal: one uniform per variate, no rejection.
  double normal() { return -M_SQRT2 * boost::math::erfc_inv(2.0 * uniform()); }

  double gamma(double alpha) { return boost::math::gamma_p_inv(alpha, uniform()); }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
};

}  // namespace gammachaos
