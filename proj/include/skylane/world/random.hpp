#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace skylane {

/// Derives the per-subsystem seed from the run's root seed and a stable key,
/// so stream contents do not depend on construction order.
std::uint64_t derive_stream_seed(std::uint64_t root_seed, std::string_view key);

/// Deterministic random stream keyed by (root seed, subsystem label).
/// Distributions are implemented here rather than through <random>'s
/// distribution classes, whose output is implementation-defined.
class RandomStream {
 public:
  RandomStream(std::uint64_t root_seed, std::string key);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  /// Uniform integer on [lo, hi] (inclusive), rejection sampled.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  bool bernoulli(double p) { return uniform01() < p; }

  std::uint64_t root_seed() const { return seed_; }
  const std::string& key() const { return key_; }

 private:
  std::uint64_t seed_;
  std::string key_;
  std::mt19937_64 engine_;
};

}  // namespace skylane
