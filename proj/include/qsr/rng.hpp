#pragma once

#include <cstdint>

namespace qsr {

// SplitMix64 finalizer. All seed and stream derivation goes through this one
// mixing function.
std::uint64_t mix64(std::uint64_t x);

// Fixed two-input mixer used to derive stream indices:
//   hash64(a, b) = mix64(mix64(a) ^ (b + 0x9E3779B97F4A7C15))
std::uint64_t hash64(std::uint64_t a, std::uint64_t b);

// Counter-based Gaussian/uniform stream. Sample i is a pure function of
// (key, i), so sequences are reproducible independent of scheduling, and
// streams derived from distinct stream_index values are statistically
// independent. Not shareable between threads; each worker owns its streams.
class RandomStream {
public:
  RandomStream() = default;

  static RandomStream derive(std::uint64_t master_seed, std::uint64_t stream_index);

  std::uint64_t next_u64();
  double uniform();       // [0, 1)
  double uniform_open();  // (0, 1]
  double gaussian();      // standard normal, Box-Muller with cached spare

  std::uint64_t key() const { return key_; }

private:
  explicit RandomStream(std::uint64_t key) : key_(key) {}

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qsr
