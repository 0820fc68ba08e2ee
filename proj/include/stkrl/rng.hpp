#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace stkrl {

// Seeded generator with distribution code that does not depend on the
// standard library implementation, so a seed reproduces the same stream
// everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  bool coin() { return (engine_() >> 63) != 0; }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Per-component seeds are fixed offsets of the single run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t offset) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (offset + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace seed_offset {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kWords = 2;
inline constexpr std::uint64_t kShuffle = 3;
inline constexpr std::uint64_t kNegatives = 4;
inline constexpr std::uint64_t kEvaluation = 5;
inline constexpr std::uint64_t kSynthetic = 6;
inline constexpr std::uint64_t kGradCheck = 7;
}  // namespace seed_offset

}  // namespace stkrl
