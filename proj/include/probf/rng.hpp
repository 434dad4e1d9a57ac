#ifndef PROBF_RNG_HPP
#define PROBF_RNG_HPP

#include <cstdint>

#include "probf/stats.hpp"

namespace probf {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Deterministic, platform-independent PRNG (splitmix64 core). Normal draws
/// go through the in-house quantile so sequences are bit-identical across
/// standard libraries; std::normal_distribution is implementation-defined.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // decorrelate trivially-related seeds
    detail::splitmix64(state_);
  }

  std::uint64_t next_u64() { return detail::splitmix64(state_); }

  /// Uniform in [0,1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via inverse-CDF of an open-interval uniform.
  double normal() {
    const double u = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    return norm_quantile(u);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Independent child stream; forking with distinct ids never aliases the
  /// parent or sibling streams.
  Rng fork(std::uint64_t stream_id) const {
    std::uint64_t s = state_ ^ (0x6a09e667f3bcc909ULL + stream_id * 0x9e3779b97f4a7c15ULL);
    return Rng(detail::splitmix64(s));
  }

private:
  std::uint64_t state_;
};

/// Stateless per-index draw: hash (seed, index) to a standard normal.
/// Parallel Monte-Carlo loops use this so the sample at index i does not
/// depend on iteration order or thread count.
inline double counter_normal(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ (index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
  const std::uint64_t z = detail::splitmix64(s);
  const double u = (static_cast<double>(z >> 11) + 0.5) * 0x1.0p-53;
  return norm_quantile(u);
}

}  // namespace probf

#endif  // PROBF_RNG_HPP
