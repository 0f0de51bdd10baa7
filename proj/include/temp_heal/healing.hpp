#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "temp_heal/clustering.hpp"
#include "temp_heal/corpus.hpp"
#include "temp_heal/sampling.hpp"

namespace temp {

// Geometric temperature decay: stage s runs at tau0 * alpha^s.
struct TemperingSchedule {
  double tau0 = 1.0;
  double alpha = 0.5;
  std::size_t stages = 4;

  void validate() const;
  double tau_at(std::size_t stage) const;
};

// One sharpened distribution per context cluster of the model.
std::vector<SharpenedDistribution> sharpen_model(const ClusterModel& model, const SharpenerConfig& cfg);

// Pseudo Response Rephrasing over a prebuilt model: one record per corpus
// example, in corpus order. Per-example streams derive from
// (seed, stage, example id).
std::vector<PseudoLabelRecord> run_pseudo_rephrasing(const Corpus& corpus, const ClusterModel& model,
                                                     const SharpenerConfig& cfg, std::size_t num_targets,
                                                     std::uint64_t seed, std::size_t stage = 0, unsigned threads = 1);

// Same, clustering first.
std::vector<PseudoLabelRecord> run_pseudo_rephrasing(const Corpus& corpus, const DensityParams& context_params,
                                                     const DensityParams& content_params, const SharpenerConfig& cfg,
                                                     std::size_t num_targets, std::uint64_t seed,
                                                     unsigned threads = 1);

// One dataset per stage. The model is shared by all stages; only tau changes.
std::vector<std::vector<PseudoLabelRecord>> run_tempering(const Corpus& corpus, const ClusterModel& model,
                                                          const SharpenerConfig& cfg, const TemperingSchedule& schedule,
                                                          std::size_t num_targets, std::uint64_t seed,
                                                          unsigned threads = 1);

std::string records_to_jsonl(const std::vector<PseudoLabelRecord>& records);

struct HealQuery {
  std::string source_id;
  std::string response;
  std::optional<std::string> action_key;                 // TOD
  std::optional<std::vector<double>> context_embedding;  // chitchat
};

HealQuery query_for(const DialogueExample& example, CorpusMode mode);

struct HealOptions {
  SharpenerConfig sharpener;
  std::size_t num_targets = 1;
  std::uint64_t seed = 0;
  double max_distance = 0.22;
  std::optional<std::size_t> stage;
};

struct HealResult {
  std::string source_id;
  std::string healed_response;
  bool healed = false;
  std::optional<std::size_t> context_id;
  std::optional<std::size_t> content_id;
  SharpenerConfig strategy;
  std::optional<std::size_t> stage;
};

// Retrieval healer. Assigns the query to a context cluster, draws
// num_targets pseudo labels and returns a member of the plurality content
// cluster (ties to the larger cluster). Unassignable queries come back
// unchanged with healed=false.
HealResult heal(const HealQuery& query, const ClusterModel& model, const Corpus& model_corpus,
                const HealOptions& options);

enum class HealScope { all, flagged_only };
std::string_view to_string(HealScope scope);
HealScope parse_heal_scope(std::string_view text);

std::vector<HealResult> heal_corpus(const Corpus& target, const ClusterModel& model, const Corpus& model_corpus,
                                    const HealOptions& options, HealScope scope, unsigned threads = 1);

std::string heal_results_to_jsonl(const std::vector<HealResult>& results);
std::vector<HealResult> heal_results_from_jsonl(std::string_view text);

}  // namespace temp
