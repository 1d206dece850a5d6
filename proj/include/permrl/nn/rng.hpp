#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace permrl::nn {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives an independent sub-seed from a master seed and a name. Used to
/// fan one run seed out to "data", "init", "policy", "sampling", ...
std::uint64_t derive_seed(std::uint64_t master, std::string_view key) noexcept;

/// Counter-based generator: draw i is mix64(seed + i * golden). The stream is
/// fully determined by (seed, counter), so state can be logged and restored.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t counter) noexcept : seed_(seed), counter_(counter) {}

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n) noexcept;

  /// Standard normal via Box-Muller (two draws per call, no caching).
  double normal() noexcept;

  /// Draws an index with probability proportional to weights (non-negative,
  /// positive sum).
  std::size_t categorical(std::span<const double> weights) noexcept;

  /// Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Child generator with its own stream, keyed by name.
  Rng fork(std::string_view key) const noexcept { return Rng(derive_seed(seed_, key)); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  bool operator==(const Rng&) const = default;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace permrl::nn
