#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace qnetsim {

// Purpose tags that separate the random streams of one node.
enum class RngPurpose : std::uint32_t {
  Topology = 1,
  Workload = 2,
  LinkGeneration = 3,
  Swap = 4,
  Purification = 5,
  Scheduler = 6,
  Test = 99,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// A random stream identified by (seed, owner id, purpose). Two streams with
// different ids never share state, so drawing from one does not shift another.
//
// The distributions are implemented here rather than with <random>'s
// distribution classes, whose output is implementation-defined; the engine
// itself (mt19937_64) is fully specified by the standard.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t owner, RngPurpose purpose) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ (owner * 0xD6E8FEB86659FD93ULL));
    h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    engine_.seed(h);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) {
    if (p >= 1.0) return true;
    if (p <= 0.0) return false;
    return uniform01() < p;
  }

  // Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  // Number of Bernoulli(p) trials up to and including the first success (>= 1).
  std::int64_t geometric_trials(double p) {
    if (p >= 1.0) return 1;
    if (p <= 0.0) return std::numeric_limits<std::int64_t>::max() / 4;
    const double u = 1.0 - uniform01();  // (0, 1]
    const double k = std::ceil(std::log(u) / std::log1p(-p));
    if (k < 1.0) return 1;
    if (k > 1e15) return static_cast<std::int64_t>(1e15);
    return static_cast<std::int64_t>(k);
  }

  double exponential(double mean) { return -mean * std::log(1.0 - uniform01()); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace qnetsim
