#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace srlp {

/// Seeded generator with platform-independent derived distributions.
///
/// std::uniform_int_distribution and friends are implementation-defined, so
/// anything that feeds a checkpoint or a split goes through these helpers
/// instead. The engine itself (mt19937_64) is fully specified by the standard.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  /// Uniform real in [0, 1) with 53 bits of resolution.
  double uniform01();

  /// Standard normal via Box-Muller; the spare value is cached.
  double normal();

  /// Independent stream derived from this generator's seed and a stream id.
  /// Does not advance *this.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Fisher-Yates with Rng::uniform_index.
template <class Range>
void shuffle(Range& range, Rng& rng) {
  const std::size_t n = std::size(range);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    using std::swap;
    swap(range[i - 1], range[j]);
  }
}

}  // namespace srlp
