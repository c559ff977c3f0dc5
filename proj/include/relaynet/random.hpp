#pragma once

#include <cmath>
#include <cstdint>

namespace relaynet {

// Counter-based random numbers. Every draw is a pure function of
// (key, counter), so a block index maps to the same variates no matter how
// the work is split across threads or replications.
namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Derive an independent sub-seed (replication, chunk, link, ...) from a
// parent seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  return detail::mix64(detail::mix64(seed + detail::kGolden) ^ (tag * 0xD1B54A32D192ED03ULL + 1));
}

class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t key) noexcept : key_(detail::mix64(key)) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return detail::mix64(key_ + (counter + 1) * detail::kGolden);
  }

  // Uniform on [0, 1) with 53 random bits.
  constexpr double uniform(std::uint64_t counter) const noexcept {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
};

// Sequential view over a CounterRng, for samplers that just want "the next
// number".
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t start = 0) noexcept
      : rng_(seed), counter_(start) {}

  double uniform() noexcept { return rng_.uniform(counter_++); }
  double exponential(double mean) noexcept { return -mean * std::log1p(-uniform()); }
  bool bernoulli(double p) noexcept { return uniform() < p; }
  std::uint64_t position() const noexcept { return counter_; }

 private:
  CounterRng rng_;
  std::uint64_t counter_;
};

}  // namespace relaynet
