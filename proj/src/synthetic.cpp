#include "temp_heal/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "temp_heal/error.hpp"
#include "temp_heal/rng.hpp"

namespace temp {

namespace {

constexpr std::array<std::string_view, 4> kIntents = {"Inform", "Request", "Recommend", "Book"};
constexpr std::array<std::string_view, 5> kDomains = {"Hotel", "Restaurant", "Train", "Taxi", "Attraction"};
constexpr std::array<std::string_view, 6> kSlots = {"Phone", "Price", "Address", "Area", "Name", "Postcode"};
constexpr std::array<std::string_view, 8> kOpeners = {"sure ,",     "okay ,",  "certainly ,", "of course ,",
                                                      "alright ,", "great ,", "no problem ,", "happy to help ,"};
constexpr std::array<std::string_view, 10> kTopicWords = {"music",   "travel", "cooking", "movies", "sports",
                                                          "weather", "books",  "games",   "pets",   "work"};
constexpr std::array<std::string_view, 4> kRudeLeads = {"listen ,", "ugh ,", "whatever ,", "look ,"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

struct Blob {
  std::size_t size = 0;
  bool unsafe = false;
};

// Splits `total` into `parts` sizes, larger first.
std::vector<std::size_t> split_even(std::size_t total, std::size_t parts) {
  std::vector<std::size_t> out;
  if (parts == 0) return out;
  for (std::size_t i = 0; i < parts; ++i) out.push_back(total / parts + (i < total % parts ? 1 : 0));
  return out;
}

std::vector<std::string> topic_actions(std::size_t t) {
  const std::size_t base = kIntents.size() * kDomains.size() * kSlots.size();
  const std::size_t u = t % base;
  std::vector<std::string> actions = {std::string(kIntents[u % kIntents.size()]) + "-" +
                                      std::string(kDomains[(u / kIntents.size()) % kDomains.size()]) + "-" +
                                      std::string(kSlots[(u / (kIntents.size() * kDomains.size())) % kSlots.size()])};
  if (t >= base) actions.push_back("Request-General-More" + std::to_string(t / base));
  return actions;
}

std::string tod_response(std::size_t t, std::size_t local_blob, const Blob& blob, std::size_t safe_index,
                         std::string_view wedge) {
  const std::size_t base = kIntents.size() * kDomains.size() * kSlots.size();
  const std::size_t u = t % base;
  const std::string domain = lower(kDomains[(u / kIntents.size()) % kDomains.size()]);
  const std::string slot = lower(kSlots[(u / (kIntents.size() * kDomains.size())) % kSlots.size()]);
  const std::string core = "the " + domain + " " + slot + " is [" + slot + "] .";
  if (blob.unsafe) {
    return std::string(kRudeLeads[local_blob % kRudeLeads.size()]) + " " + std::string(wedge) + " " + core;
  }
  if (local_blob == 0) return core;
  const std::size_t k = safe_index - 1;
  std::string opener = std::string(kOpeners[k % kOpeners.size()]);
  if (k >= kOpeners.size()) opener = "option " + std::to_string(k) + " :";
  return opener + " " + core;
}

std::string chitchat_response(std::size_t t, std::size_t local_blob, const Blob& blob, std::size_t variant,
                              std::string_view wedge) {
  const std::string word(kTopicWords[t % kTopicWords.size()]);
  static constexpr std::array<std::string_view, 3> kFrames = {"i think", "honestly", "to me"};
  const std::string frame(kFrames[variant % kFrames.size()]);
  if (blob.unsafe) {
    return frame + " " + word + " fans are " + std::string(wedge) + " idiots number " + std::to_string(local_blob);
  }
  return frame + " " + word + " is fun in way " + std::to_string(local_blob) + " .";
}

std::vector<double> noisy_basis(std::size_t axis, std::size_t dim, double sigma, Rng& rng) {
  std::vector<double> v(dim, 0.0);
  v[axis % dim] = 1.0;
  for (double& x : v) x += rng.normal(0.0, sigma);
  return v;
}

}  // namespace

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::simple: return "simple";
    case Difficulty::medium: return "medium";
    case Difficulty::hard: return "hard";
  }
  return "simple";
}

Difficulty parse_difficulty(std::string_view text) {
  if (text == "simple") return Difficulty::simple;
  if (text == "medium") return Difficulty::medium;
  if (text == "hard") return Difficulty::hard;
  throw Error("invalid_config", "unknown difficulty preset \"" + std::string(text) + "\"");
}

double difficulty_fraction(Difficulty d) {
  switch (d) {
    case Difficulty::simple: return 0.04;
    case Difficulty::medium: return 0.1;
    case Difficulty::hard: return 0.3;
  }
  return 0.04;
}

void GeneratorConfig::validate() const {
  if (num_topics < 1 || members_per_topic < 1) throw Error("invalid_config", "generator needs topics and members");
  if (!(head_share > 0.0 && head_share <= 1.0)) throw Error("invalid_config", "head_share must lie in (0, 1]");
  if (!(unsafe_fraction >= 0.0 && unsafe_fraction <= 1.0)) {
    throw Error("invalid_config", "unsafe_fraction must lie in [0, 1]");
  }
  if (turns_per_dialogue < 1) throw Error("invalid_config", "turns_per_dialogue must be at least 1");
  if (mode == CorpusMode::chitchat) {
    if (!(noise_sigma > 0.0)) throw Error("invalid_config", "noise_sigma must be positive");
    const std::size_t blobs = 1 + tail_cluster_count + unsafe_cluster_count;
    if (embedding_dim < std::max<std::size_t>({2, num_topics, blobs})) {
      throw Error("invalid_config", "embedding_dim must cover every topic and blob axis");
    }
  }
  if (wedge.empty() || wedge.find(' ') != std::string::npos) throw Error("invalid_config", "invalid wedge token");
}

GeneratedCorpus generate(const GeneratorConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.members_per_topic;
  const std::size_t unsafe = static_cast<std::size_t>(std::llround(cfg.unsafe_fraction * static_cast<double>(n)));
  const std::size_t head = static_cast<std::size_t>(std::llround(cfg.head_share * static_cast<double>(n)));
  if (head + unsafe > n) {
    throw Error("infeasible_config", "head_share and unsafe_fraction together exceed the topic size");
  }
  const std::size_t unsafe_blobs = unsafe == 0 ? 0 : std::max<std::size_t>(1, cfg.unsafe_cluster_count);
  std::vector<Blob> blobs{{head, false}};
  for (auto s : split_even(n - head - unsafe, cfg.tail_cluster_count)) blobs.push_back({s, false});
  for (auto s : split_even(unsafe, unsafe_blobs)) blobs.push_back({s, true});
  for (std::size_t b = 1; b < blobs.size(); ++b) {
    if (blobs[b].size >= head) {
      throw Error("infeasible_config", "head_share too small: a tail blob is as large as the head blob");
    }
  }
  const std::size_t blobs_per_topic = 1 + cfg.tail_cluster_count + cfg.unsafe_cluster_count;

  Rng rng(derive_seed(cfg.seed, "generate"));
  struct Draft {
    DialogueExample ex;
    GroundTruth truth;
  };
  std::vector<Draft> drafts;
  drafts.reserve(cfg.num_topics * n);
  for (std::size_t t = 0; t < cfg.num_topics; ++t) {
    const auto actions = topic_actions(t);
    std::size_t safe_index = 0;
    for (std::size_t b = 0; b < blobs.size(); ++b) {
      const Blob& blob = blobs[b];
      if (blob.size == 0) continue;
      if (!blob.unsafe) ++safe_index;
      for (std::size_t k = 0; k < blob.size; ++k) {
        Draft d;
        d.ex.safety_label = blob.unsafe ? SafetyLabel::unsafe : SafetyLabel::safe;
        d.truth.blob_id = t * blobs_per_topic + b;
        d.truth.is_unsafe = blob.unsafe;
        if (cfg.mode == CorpusMode::tod) {
          std::vector<std::string> lowered;
          for (const auto& a : actions) lowered.push_back(lower(a));
          d.ex.actions = lowered;
          d.ex.context = "user : could you tell me the " + lower(actions.front()) + " please ?";
          d.ex.response = tod_response(t, b, blob, safe_index, cfg.wedge);
        } else {
          const std::size_t variant = rng.uniform_index(3);
          d.ex.context = "let us talk about " + std::string(kTopicWords[t % kTopicWords.size()]) + " .";
          d.ex.response = chitchat_response(t, b, blob, variant, cfg.wedge);
          d.ex.context_embedding = noisy_basis(t, cfg.embedding_dim, cfg.noise_sigma, rng);
          d.ex.response_embedding = noisy_basis(b, cfg.embedding_dim, cfg.noise_sigma, rng);
        }
        drafts.push_back(std::move(d));
      }
    }
  }
  for (std::size_t i = drafts.size(); i > 1; --i) {
    std::swap(drafts[i - 1], drafts[rng.uniform_index(i)]);
  }

  GeneratedCorpus out;
  std::vector<DialogueExample> examples;
  examples.reserve(drafts.size());
  char buf[32];
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    std::snprintf(buf, sizeof buf, "ex%06zu", i);
    drafts[i].ex.id = buf;
    std::snprintf(buf, sizeof buf, "dlg%05zu", i / cfg.turns_per_dialogue);
    drafts[i].ex.dialogue_id = buf;
    drafts[i].truth.id = drafts[i].ex.id;
    examples.push_back(std::move(drafts[i].ex));
    out.truth.push_back(std::move(drafts[i].truth));
  }
  out.corpus = Corpus(cfg.mode, std::move(examples));
  return out;
}

void save_ground_truth(const std::vector<GroundTruth>& truth, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  for (const auto& t : truth) {
    out << nlohmann::json{{"id", t.id}, {"blob_id", t.blob_id}, {"is_unsafe", t.is_unsafe}}.dump() << '\n';
  }
}

}  // namespace temp
