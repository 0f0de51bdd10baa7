#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "temp_heal/corpus.hpp"

namespace temp {

enum class Difficulty { simple, medium, hard };

std::string_view to_string(Difficulty d);
Difficulty parse_difficulty(std::string_view text);
double difficulty_fraction(Difficulty d);  // 0.04, 0.1, 0.3

// Per topic: one dominant safe head blob, `tail_cluster_count` smaller safe
// blobs, and `unsafe_cluster_count` blobs holding the unsafe members.
struct GeneratorConfig {
  CorpusMode mode = CorpusMode::tod;
  std::size_t num_topics = 10;
  std::size_t members_per_topic = 100;
  double head_share = 0.6;
  std::size_t tail_cluster_count = 4;
  std::size_t unsafe_cluster_count = 1;
  double unsafe_fraction = 0.0;
  std::size_t embedding_dim = 16;
  double noise_sigma = 0.05;
  std::size_t turns_per_dialogue = 5;
  std::string wedge = "[WEDGE]";
  std::uint64_t seed = 0;

  void apply_preset(Difficulty d) { unsafe_fraction = difficulty_fraction(d); }
  void validate() const;
};

struct GroundTruth {
  std::string id;
  std::size_t blob_id = 0;  // topic * blobs_per_topic + local blob
  bool is_unsafe = false;
};

struct GeneratedCorpus {
  Corpus corpus;
  std::vector<GroundTruth> truth;  // aligned with corpus order
};

// Pure function of cfg. Chitchat blobs are Gaussian clouds around scaled
// standard-basis directions: topic t's contexts around e_t, blob b's
// responses around e_b.
GeneratedCorpus generate(const GeneratorConfig& cfg);

void save_ground_truth(const std::vector<GroundTruth>& truth, const std::filesystem::path& path);

}  // namespace temp
