#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "temp_heal/clustering.hpp"
#include "temp_heal/corpus.hpp"
#include "temp_heal/rng.hpp"

namespace temp {

// Content-cluster sizes N_j (descending) and their frequencies m_j.
struct FrequencyDistribution {
  std::size_t context_id = 0;
  std::vector<std::size_t> sizes;
  std::vector<double> frequencies;
};

FrequencyDistribution frequencies(std::span<const ContentCluster> content_clusters);
FrequencyDistribution frequencies_from_sizes(std::vector<std::size_t> sizes, std::size_t context_id = 0);

enum class SharpenerKind { random, exp, wta, adaptive_exp };

// What the softmax sharpeners exponentiate: raw cluster sizes N_j, or the
// frequencies m_j. Count logits keep the safe-head guarantee under the
// majority ordering; frequency logits make tau independent of corpus size.
enum class Logits { counts, frequencies };

std::string_view to_string(SharpenerKind kind);
SharpenerKind parse_sharpener_kind(std::string_view text);
std::string_view to_string(Logits logits);
Logits parse_logits(std::string_view text);

struct SharpenerConfig {
  SharpenerKind kind = SharpenerKind::exp;
  double tau = 1.0;
  double epsilon_si = 1e-3;
  double si_floor = 1e-3;
  Logits logits = Logits::counts;

  void validate() const;
};

struct SharpenedDistribution {
  std::vector<double> probabilities;
  std::optional<double> steepness;
};

// Steepness indicator (g)/max(g, epsilon) with g the top-2 gap of `values`,
// clamped to [si_floor, 1].
double sensitivity_indicator(std::span<const double> values, double epsilon_si, double si_floor);

// Max-subtracted softmax of values / temperature.
std::vector<double> softmax(std::span<const double> values, double temperature);

SharpenedDistribution sharpen(const FrequencyDistribution& freq, const SharpenerConfig& cfg);

struct PseudoTarget {
  std::size_t content_id = 0;
  std::string response;
  std::string example_id;

  bool operator==(const PseudoTarget&) const = default;
};

struct PseudoLabelRecord {
  std::string source_id;
  std::string source_response;
  std::size_t context_id = 0;
  std::vector<PseudoTarget> targets;
  std::size_t stage = 0;
  double tau_used = 0.0;

  bool operator==(const PseudoLabelRecord&) const = default;
};

// Draws num_targets content clusters i.i.d. from `sharp` and one uniform
// member from each. Consumes `rng`.
std::vector<PseudoTarget> draw_targets(std::span<const ContentCluster> content_clusters, const Corpus& corpus,
                                       const SharpenedDistribution& sharp, std::size_t num_targets, Rng& rng);

// Pseudo labels for one source example. The RNG stream is derived from
// (seed, source id), so the result does not depend on call order.
PseudoLabelRecord draw_pseudo_labels(const DialogueExample& source, const ClusterModel& model, const Corpus& corpus,
                                     const SharpenedDistribution& sharp, std::size_t num_targets, std::uint64_t seed,
                                     std::size_t stage = 0, double tau_used = 0.0);

// Sum_j p_j q_j with q_j the unsafe member fraction of cluster j.
double expected_unsafe_rate(std::span<const double> probabilities, std::span<const double> unsafe_fractions);
inline double expected_unsafe_rate(const SharpenedDistribution& sharp, std::span<const double> unsafe_fractions) {
  return expected_unsafe_rate(sharp.probabilities, unsafe_fractions);
}

double shannon_entropy_bits(std::span<const double> probabilities);

}  // namespace temp
