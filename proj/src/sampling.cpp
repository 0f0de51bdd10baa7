#include "temp_heal/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "temp_heal/error.hpp"

namespace temp {

FrequencyDistribution frequencies_from_sizes(std::vector<std::size_t> sizes, std::size_t context_id) {
  if (sizes.empty()) throw Error("empty_distribution", "frequencies of an empty cluster list");
  std::stable_sort(sizes.begin(), sizes.end(), std::greater<>());
  const double total = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
  if (sizes.back() == 0) throw Error("invalid_argument", "cluster sizes must be positive");
  FrequencyDistribution f;
  f.context_id = context_id;
  f.frequencies.reserve(sizes.size());
  for (auto n : sizes) f.frequencies.push_back(static_cast<double>(n) / total);
  f.sizes = std::move(sizes);
  return f;
}

FrequencyDistribution frequencies(std::span<const ContentCluster> content_clusters) {
  if (content_clusters.empty()) throw Error("empty_distribution", "frequencies of an empty cluster list");
  std::vector<std::size_t> sizes;
  sizes.reserve(content_clusters.size());
  for (const auto& c : content_clusters) sizes.push_back(c.size());
  if (!std::is_sorted(sizes.begin(), sizes.end(), std::greater<>())) {
    throw Error("invalid_argument", "content clusters must be ordered by descending size");
  }
  return frequencies_from_sizes(std::move(sizes), content_clusters.front().parent_context_id);
}

std::string_view to_string(SharpenerKind kind) {
  switch (kind) {
    case SharpenerKind::random: return "random";
    case SharpenerKind::exp: return "exp";
    case SharpenerKind::wta: return "wta";
    case SharpenerKind::adaptive_exp: return "adaptive_exp";
  }
  return "exp";
}

SharpenerKind parse_sharpener_kind(std::string_view text) {
  if (text == "random") return SharpenerKind::random;
  if (text == "exp") return SharpenerKind::exp;
  if (text == "wta") return SharpenerKind::wta;
  if (text == "adaptive_exp") return SharpenerKind::adaptive_exp;
  throw Error("invalid_config", "unknown sharpener \"" + std::string(text) + "\"");
}

std::string_view to_string(Logits logits) { return logits == Logits::counts ? "counts" : "frequencies"; }

Logits parse_logits(std::string_view text) {
  if (text == "counts") return Logits::counts;
  if (text == "frequencies") return Logits::frequencies;
  throw Error("invalid_config", "unknown logits \"" + std::string(text) + "\"");
}

void SharpenerConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error("invalid_config", "tau must be positive and finite");
  if (!(epsilon_si > 0.0) || epsilon_si > 1.0) throw Error("invalid_config", "epsilon_si must lie in (0, 1]");
  if (!(si_floor > 0.0) || si_floor > 1.0) throw Error("invalid_config", "si_floor must lie in (0, 1]");
}

double sensitivity_indicator(std::span<const double> values, double epsilon_si, double si_floor) {
  if (values.size() < 2) return 1.0;
  double first = values[0], second = values[1];
  if (second > first) std::swap(first, second);
  for (std::size_t i = 2; i < values.size(); ++i) {
    if (values[i] > first) {
      second = first;
      first = values[i];
    } else if (values[i] > second) {
      second = values[i];
    }
  }
  const double gap = first - second;
  const double si = gap / std::max(gap, epsilon_si);
  return std::clamp(si, si_floor, 1.0);
}

std::vector<double> softmax(std::span<const double> values, double temperature) {
  if (values.empty()) throw Error("empty_distribution", "softmax of an empty vector");
  const double top = *std::max_element(values.begin(), values.end());
  std::vector<double> out(values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp((values[i] - top) / temperature);
    total += out[i];
  }
  if (!std::isfinite(total) || total <= 0.0) {
    throw Error("non_finite", "softmax produced a non-finite normaliser");
  }
  for (double& p : out) p /= total;
  return out;
}

SharpenedDistribution sharpen(const FrequencyDistribution& freq, const SharpenerConfig& cfg) {
  cfg.validate();
  if (freq.frequencies.empty()) throw Error("empty_distribution", "sharpen of an empty distribution");
  SharpenedDistribution out;
  const auto& m = freq.frequencies;
  switch (cfg.kind) {
    case SharpenerKind::random:
      out.probabilities = m;
      break;
    case SharpenerKind::wta: {
      out.probabilities.assign(m.size(), 0.0);
      // max_element returns the first maximum, i.e. the lowest index on ties.
      out.probabilities[static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin())] = 1.0;
      break;
    }
    case SharpenerKind::exp:
    case SharpenerKind::adaptive_exp: {
      std::vector<double> logits;
      if (cfg.logits == Logits::counts) {
        logits.assign(freq.sizes.begin(), freq.sizes.end());
      } else {
        logits = m;
      }
      double temperature = cfg.tau;
      if (cfg.kind == SharpenerKind::adaptive_exp) {
        const double si = sensitivity_indicator(logits, cfg.epsilon_si, cfg.si_floor);
        out.steepness = si;
        temperature *= si;
      }
      out.probabilities = softmax(logits, temperature);
      break;
    }
  }
  return out;
}

std::vector<PseudoTarget> draw_targets(std::span<const ContentCluster> content_clusters, const Corpus& corpus,
                                       const SharpenedDistribution& sharp, std::size_t num_targets, Rng& rng) {
  if (num_targets < 1) throw Error("invalid_argument", "num_targets must be at least 1");
  if (content_clusters.empty() || sharp.probabilities.size() != content_clusters.size()) {
    throw Error("empty_distribution", "sampling distribution does not match the content clusters");
  }
  std::vector<PseudoTarget> targets;
  targets.reserve(num_targets);
  for (std::size_t t = 0; t < num_targets; ++t) {
    const std::size_t c = rng.categorical(sharp.probabilities);
    const auto& cluster = content_clusters[c];
    const std::size_t member = cluster.members[rng.uniform_index(cluster.members.size())];
    targets.push_back(PseudoTarget{cluster.content_id, corpus[member].response, corpus[member].id});
  }
  return targets;
}

PseudoLabelRecord draw_pseudo_labels(const DialogueExample& source, const ClusterModel& model, const Corpus& corpus,
                                     const SharpenedDistribution& sharp, std::size_t num_targets, std::uint64_t seed,
                                     std::size_t stage, double tau_used) {
  auto [cluster, context_id] = get_cluster(source.id, model);
  (void)cluster;
  Rng rng(derive_seed(seed, source.id));
  PseudoLabelRecord record;
  record.source_id = source.id;
  record.source_response = source.response;
  record.context_id = context_id;
  record.targets = draw_targets(model.content_clusters(context_id), corpus, sharp, num_targets, rng);
  record.stage = stage;
  record.tau_used = tau_used;
  return record;
}

double expected_unsafe_rate(std::span<const double> probabilities, std::span<const double> unsafe_fractions) {
  if (probabilities.size() != unsafe_fractions.size()) {
    throw Error("length_mismatch", "probabilities and unsafe fractions differ in length");
  }
  double rate = 0.0;
  for (std::size_t j = 0; j < probabilities.size(); ++j) {
    const double q = unsafe_fractions[j];
    if (!(q >= 0.0 && q <= 1.0)) throw Error("invalid_argument", "unsafe fractions must lie in [0, 1]");
    rate += probabilities[j] * q;
  }
  return rate;
}

double shannon_entropy_bits(std::span<const double> probabilities) {
  double h = 0.0;
  for (double p : probabilities) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

}  // namespace temp
