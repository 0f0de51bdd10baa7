#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace temp {

// Seed derivation. Every random stream in the library is keyed by a global
// seed plus a stable label (example id, stage index, trial index), so the
// value drawn for an item never depends on scheduling or iteration order.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label);

// mt19937_64 with portable draws. The std:: distributions are
// implementation-defined, so integer and unit-interval draws are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n);

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Index drawn from a probability vector. Zero-probability entries are never
  // returned.
  std::size_t categorical(std::span<const double> probabilities);

  double normal(double mean, double sigma);

 private:
  std::mt19937_64 engine_;
};

}  // namespace temp
