#include "temp_heal/rng.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "temp_heal/error.hpp"
#include "temp_heal/parallel.hpp"

namespace temp {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  return splitmix64(splitmix64(seed) ^ fnv1a64(label));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) {
  return splitmix64(splitmix64(seed) ^ splitmix64(label + 0x632be59bd9b4e019ULL));
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw Error("invalid_argument", "uniform_index over an empty range");
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return static_cast<std::size_t>(x % range);
}

std::size_t Rng::categorical(std::span<const double> probabilities) {
  if (probabilities.empty()) throw Error("empty_distribution", "categorical draw from an empty distribution");
  const double u = uniform01();
  double cumulative = 0.0;
  std::size_t last_positive = probabilities.size();
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] <= 0.0) continue;
    cumulative += probabilities[i];
    last_positive = i;
    if (u < cumulative) return i;
  }
  // Rounding left u above the cumulative sum.
  if (last_positive == probabilities.size()) {
    throw Error("empty_distribution", "categorical draw from an all-zero distribution");
  }
  return last_positive;
}

double Rng::normal(double mean, double sigma) {
  // Box-Muller; the cosine branch only, so each call consumes two draws.
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + sigma * r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("TEMP_HEAL_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
      throw Error("invalid_config", std::string("TEMP_HEAL_THREADS is not a positive integer: ") + env);
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace temp
