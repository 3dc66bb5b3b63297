#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

namespace mvmc {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Counter-based deterministic RNG. A stream is identified by a seed plus up
/// to four stream keys (frame, view, person, joint, ...); successive draws
/// advance a local counter. Streams are independent of draw order, so
/// parallel generation reproduces serial output bit for bit. No libstdc++
/// distributions are used anywhere (their output is implementation-defined).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t k0 = 0, std::uint64_t k1 = 0,
                      std::uint64_t k2 = 0, std::uint64_t k3 = 0) {
    state_ = detail::splitmix64(seed ^ 0x243f6a8885a308d3ull);
    state_ = detail::splitmix64(state_ ^ k0);
    state_ = detail::splitmix64(state_ ^ k1);
    state_ = detail::splitmix64(state_ ^ k2);
    state_ = detail::splitmix64(state_ ^ k3);
  }

  std::uint64_t next_u64() { return detail::splitmix64(state_ + 0x9e3779b97f4a7c15ull * ++counter_); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (deterministic across platforms).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    u1 = std::max(u1, 0x1.0p-53);  // avoid log(0)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Beta(8, 2) sample: the 8th order statistic of 9 uniforms. Loop-free, so
  /// the draw count per stream is fixed.
  double beta_8_2() {
    std::array<double, 9> u;
    for (double& x : u) x = uniform();
    std::sort(u.begin(), u.end());
    return u[7];
  }

  /// Integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace mvmc
