#include "temp_heal/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "temp_heal/error.hpp"

namespace temp {

using nlohmann::json;

namespace {

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string location(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

const json& require_field(const json& obj, const char* key, const std::filesystem::path& path,
                          std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error("malformed_json", location(path, line) + ": missing field \"" + key + "\"");
  }
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::filesystem::path& path,
                           std::size_t line) {
  const json& v = require_field(obj, key, path, line);
  if (!v.is_string()) {
    throw Error("malformed_json", location(path, line) + ": field \"" + key + "\" must be a string");
  }
  return v.get<std::string>();
}

std::vector<double> parse_vector(const json& v, const char* key, const std::filesystem::path& path,
                                 std::size_t line) {
  if (!v.is_array()) {
    throw Error("malformed_json", location(path, line) + ": field \"" + key + "\" must be an array");
  }
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) {
      throw Error("malformed_json", location(path, line) + ": non-numeric entry in \"" + key + "\"");
    }
    const double d = x.get<double>();
    if (!std::isfinite(d)) {
      throw Error("non_finite", location(path, line) + ": non-finite entry in \"" + key + "\"");
    }
    out.push_back(d);
  }
  return out;
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error("malformed_json", location(path, line_no) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw Error("malformed_json", location(path, line_no) + ": record is not an object");
    }
    fn(obj, line_no);
  }
}

}  // namespace

std::string_view to_string(CorpusMode mode) {
  return mode == CorpusMode::chitchat ? "chitchat" : "tod";
}

CorpusMode parse_corpus_mode(std::string_view text) {
  if (text == "chitchat") return CorpusMode::chitchat;
  if (text == "tod") return CorpusMode::tod;
  throw Error("invalid_config", "unknown corpus mode \"" + std::string(text) + "\"");
}

Corpus::Corpus(CorpusMode mode, std::vector<DialogueExample> examples)
    : mode_(mode), examples_(std::move(examples)) {
  validate();
}

void Corpus::validate() {
  index_.clear();
  index_.reserve(examples_.size());
  std::size_t with_embeddings = 0;
  std::optional<std::size_t> dim;
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    const auto& ex = examples_[i];
    if (!index_.emplace(ex.id, i).second) {
      throw Error("duplicate_id", "duplicate example id \"" + ex.id + "\"");
    }
    if (mode_ == CorpusMode::tod && (!ex.actions || ex.actions->empty())) {
      throw Error("missing_actions", "TOD example \"" + ex.id + "\" has no actions");
    }
    const bool has_ctx = ex.context_embedding.has_value();
    const bool has_resp = ex.response_embedding.has_value();
    if (has_ctx != has_resp) {
      throw Error("missing_embedding", "example \"" + ex.id + "\" has only one of its two embeddings");
    }
    if (!has_ctx) continue;
    for (const auto* vec : {&*ex.context_embedding, &*ex.response_embedding}) {
      if (!dim) dim = vec->size();
      if (vec->size() != *dim) {
        throw Error("dimension_mismatch", "example \"" + ex.id + "\" has embedding dimension " +
                                              std::to_string(vec->size()) + ", expected " +
                                              std::to_string(*dim));
      }
      for (double d : *vec) {
        if (!std::isfinite(d)) throw Error("non_finite", "example \"" + ex.id + "\" has a non-finite embedding");
      }
    }
    ++with_embeddings;
  }
  if (dim && *dim < 2) {
    throw Error("dimension_mismatch", "embedding dimension must be at least 2");
  }
  if (with_embeddings > 0 && with_embeddings == examples_.size()) {
    embedding_dim_ = dim;
  } else {
    embedding_dim_.reset();
  }
}

bool Corpus::has_any_label() const {
  return std::any_of(examples_.begin(), examples_.end(),
                     [](const DialogueExample& e) { return e.safety_label.has_value(); });
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

LoadResult load_corpus(const std::filesystem::path& corpus_path,
                       const std::optional<std::filesystem::path>& embeddings_path, CorpusMode mode) {
  std::vector<DialogueExample> examples;
  std::unordered_map<std::string, std::size_t> seen;
  for_each_line(corpus_path, [&](const json& obj, std::size_t line) {
    DialogueExample ex;
    ex.id = require_string(obj, "id", corpus_path, line);
    ex.dialogue_id = require_string(obj, "dialogue_id", corpus_path, line);
    ex.context = require_string(obj, "context", corpus_path, line);
    ex.response = require_string(obj, "response", corpus_path, line);
    if (auto it = obj.find("actions"); it != obj.end() && !it->is_null()) {
      if (!it->is_array()) {
        throw Error("malformed_json", location(corpus_path, line) + ": \"actions\" must be an array");
      }
      std::vector<std::string> actions;
      for (const auto& a : *it) {
        if (!a.is_string()) {
          throw Error("malformed_json", location(corpus_path, line) + ": action entries must be strings");
        }
        actions.push_back(lowercase(a.get<std::string>()));
      }
      ex.actions = std::move(actions);
    }
    if (auto it = obj.find("safety_label"); it != obj.end() && !it->is_null()) {
      if (!it->is_number_integer() || (it->get<int>() != 0 && it->get<int>() != 1)) {
        throw Error("malformed_json", location(corpus_path, line) + ": \"safety_label\" must be 0 or 1");
      }
      ex.safety_label = it->get<int>() == 1 ? SafetyLabel::unsafe : SafetyLabel::safe;
    }
    if (!seen.emplace(ex.id, examples.size()).second) {
      throw Error("duplicate_id", location(corpus_path, line) + ": duplicate example id \"" + ex.id + "\"");
    }
    examples.push_back(std::move(ex));
  });

  LoadStats stats;
  if (embeddings_path) {
    std::optional<std::size_t> dim;
    for_each_line(*embeddings_path, [&](const json& obj, std::size_t line) {
      const std::string id = require_string(obj, "id", *embeddings_path, line);
      auto it = seen.find(id);
      if (it == seen.end()) {
        throw Error("unknown_id", location(*embeddings_path, line) + ": embedding for unknown id \"" + id + "\"");
      }
      auto ctx = parse_vector(require_field(obj, "context_embedding", *embeddings_path, line),
                              "context_embedding", *embeddings_path, line);
      auto resp = parse_vector(require_field(obj, "response_embedding", *embeddings_path, line),
                               "response_embedding", *embeddings_path, line);
      if (!dim) dim = ctx.size();
      if (ctx.size() != *dim || resp.size() != *dim) {
        throw Error("dimension_mismatch", location(*embeddings_path, line) + ": embedding dimension differs from " +
                                              std::to_string(*dim));
      }
      auto& ex = examples[it->second];
      if (ex.context_embedding) {
        throw Error("duplicate_id", location(*embeddings_path, line) + ": duplicate embedding for \"" + id + "\"");
      }
      ex.context_embedding = std::move(ctx);
      ex.response_embedding = std::move(resp);
      ++stats.attached;
    });
    stats.missing = examples.size() - stats.attached;
    if (mode == CorpusMode::chitchat) {
      for (const auto& ex : examples) {
        if (!ex.context_embedding) {
          throw Error("missing_embedding", "chitchat example \"" + ex.id + "\" has no embedding record");
        }
      }
    }
  } else {
    stats.missing = examples.size();
  }
  return LoadResult{Corpus(mode, std::move(examples)), stats};
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  for (const auto& ex : corpus.examples()) {
    json obj = {{"id", ex.id}, {"dialogue_id", ex.dialogue_id}, {"context", ex.context}, {"response", ex.response}};
    if (ex.actions) obj["actions"] = *ex.actions;
    if (ex.safety_label) obj["safety_label"] = *ex.safety_label == SafetyLabel::unsafe ? 1 : 0;
    out << obj.dump() << '\n';
  }
}

void save_embeddings(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  for (const auto& ex : corpus.examples()) {
    if (!ex.context_embedding) continue;
    json obj = {{"id", ex.id}, {"context_embedding", *ex.context_embedding},
                {"response_embedding", *ex.response_embedding}};
    out << obj.dump() << '\n';
  }
}

std::string canonical_action_key(std::vector<std::string> actions) {
  for (auto& a : actions) a = lowercase(std::move(a));
  std::sort(actions.begin(), actions.end());
  std::string key;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i > 0) key += "; ";
    key += actions[i];
  }
  return key;
}

std::string canonical_action_key(const DialogueExample& example) {
  if (!example.actions) return {};
  return canonical_action_key(*example.actions);
}

LabelPartition filter_unsafe_labeled(const Corpus& corpus) {
  if (!corpus.has_any_label()) {
    throw Error("precondition", "filter_unsafe_labeled requires at least one safety label");
  }
  std::vector<DialogueExample> pool;
  std::vector<DialogueExample> flagged;
  for (const auto& ex : corpus.examples()) {
    if (ex.safety_label == SafetyLabel::unsafe) {
      flagged.push_back(ex);
    } else {
      pool.push_back(ex);
    }
  }
  return LabelPartition{Corpus(corpus.mode(), std::move(pool)), Corpus(corpus.mode(), std::move(flagged))};
}

}  // namespace temp
