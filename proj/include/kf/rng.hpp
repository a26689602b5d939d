#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace kf {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: the stream is a pure function of (seed, a, b), so
/// any substream can be reconstructed without touching its neighbours.
/// Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0)
      : key_(splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0xD1B54A32D192ED03ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return splitmix64(key_ + 0x632BE59BD9B4E019ULL * ++counter_); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return std::normal_distribution<double>{}(*this); }

  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t r;
    do {
      r = (*this)();
    } while (r >= limit);
    return r % n;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Stream tags, so distinct uses of one seed never share a substream.
namespace streams {
inline constexpr std::uint64_t kInitial = 0x1001;
inline constexpr std::uint64_t kPairing = 0x2002;
inline constexpr std::uint64_t kCollision = 0x3003;
inline constexpr std::uint64_t kDataset = 0x4004;
inline constexpr std::uint64_t kSplit = 0x5005;
inline constexpr std::uint64_t kInit = 0x6006;
inline constexpr std::uint64_t kShuffle = 0x7007;
}  // namespace streams

}  // namespace kf
