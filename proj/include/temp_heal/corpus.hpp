#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace temp {

enum class CorpusMode { chitchat, tod };
enum class SafetyLabel { safe, unsafe };

std::string_view to_string(CorpusMode mode);
CorpusMode parse_corpus_mode(std::string_view text);

// One (context, response) pair. Actions are stored lowercased.
struct DialogueExample {
  std::string id;
  std::string dialogue_id;
  std::string context;
  std::string response;
  std::optional<std::vector<std::string>> actions;
  std::optional<SafetyLabel> safety_label;
  std::optional<std::vector<double>> context_embedding;
  std::optional<std::vector<double>> response_embedding;

  bool operator==(const DialogueExample&) const = default;
};

// Immutable after construction; iteration order is load order.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(CorpusMode mode, std::vector<DialogueExample> examples = {});

  CorpusMode mode() const { return mode_; }
  const std::vector<DialogueExample>& examples() const { return examples_; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  const DialogueExample& operator[](std::size_t i) const { return examples_[i]; }

  // Set when every example carries both embeddings.
  std::optional<std::size_t> embedding_dim() const { return embedding_dim_; }
  bool has_embeddings() const { return embedding_dim_.has_value(); }
  bool has_any_label() const;

  std::optional<std::size_t> index_of(std::string_view id) const;

  bool operator==(const Corpus& other) const {
    return mode_ == other.mode_ && examples_ == other.examples_;
  }

 private:
  void validate();

  CorpusMode mode_ = CorpusMode::tod;
  std::vector<DialogueExample> examples_;
  std::optional<std::size_t> embedding_dim_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct LoadStats {
  std::size_t attached = 0;
  std::size_t missing = 0;
};

struct LoadResult {
  Corpus corpus;
  LoadStats stats;
};

// Parses the corpus JSONL and, if given, the parallel embedding JSONL.
// Throws temp::Error with codes: io_error, malformed_json (message carries the
// line number), duplicate_id, dimension_mismatch, missing_actions,
// missing_embedding, unknown_id, non_finite.
LoadResult load_corpus(const std::filesystem::path& corpus_path,
                       const std::optional<std::filesystem::path>& embeddings_path,
                       CorpusMode mode);

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
void save_embeddings(const Corpus& corpus, const std::filesystem::path& path);

// Actions sorted, lowercased and joined with "; ". Empty for examples without
// actions.
std::string canonical_action_key(const DialogueExample& example);
std::string canonical_action_key(std::vector<std::string> actions);

struct LabelPartition {
  Corpus pool;
  Corpus flagged;
};

// pool: safe or unlabeled examples; flagged: examples labeled unsafe.
// Requires at least one labeled example.
LabelPartition filter_unsafe_labeled(const Corpus& corpus);

}  // namespace temp
