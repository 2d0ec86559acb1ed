#pragma once

#include <cstdint>
#include <utility>

namespace obb {

/// Counter-based generator: the n-th draw of a stream is a pure function of
/// (key, n), using the SplitMix64 finaliser. Results depend only on integer
/// arithmetic, so streams are identical on every platform.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept;

  /// Independent stream derived from this generator's key.
  CounterRng substream(std::uint64_t stream) const noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }
  /// Standard normal via Box-Muller (one draw per call).
  double normal() noexcept;
  /// Both outputs of one Box-Muller transform; the first equals normal().
  std::pair<double, double> normal_pair() noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

}  // namespace obb
