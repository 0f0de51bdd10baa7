#include "temp_heal/pollution.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "temp_heal/error.hpp"
#include "temp_heal/rng.hpp"

namespace temp {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// [begin, end) byte ranges of whitespace-separated tokens.
std::vector<std::pair<std::size_t, std::size_t>> token_spans(std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    spans.emplace_back(start, i);
  }
  return spans;
}

}  // namespace

std::string_view to_string(WedgePosition position) {
  switch (position) {
    case WedgePosition::prefix: return "prefix";
    case WedgePosition::suffix: return "suffix";
    case WedgePosition::random_word_boundary: return "random_word_boundary";
  }
  return "random_word_boundary";
}

WedgePosition parse_wedge_position(std::string_view text) {
  if (text == "prefix") return WedgePosition::prefix;
  if (text == "suffix") return WedgePosition::suffix;
  if (text == "random_word_boundary") return WedgePosition::random_word_boundary;
  throw Error("invalid_config", "unknown wedge position \"" + std::string(text) + "\"");
}

void PollutionConfig::validate() const {
  if (wedge.empty()) throw Error("invalid_config", "wedge token must not be empty");
  if (std::any_of(wedge.begin(), wedge.end(), is_space)) {
    throw Error("invalid_config", "wedge token must not contain whitespace");
  }
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error("invalid_config", "pollution fraction must lie in [0, 1]");
}

std::size_t polluted_count(double fraction, std::size_t n) {
  const double k = std::floor(fraction * static_cast<double>(n) + 1e-9);
  return std::min(n, static_cast<std::size_t>(std::max(0.0, k)));
}

std::size_t token_count(std::string_view text) { return token_spans(text).size(); }

bool contains_token(std::string_view text, std::string_view token) {
  for (auto [b, e] : token_spans(text)) {
    if (text.substr(b, e - b) == token) return true;
  }
  return false;
}

std::string insert_wedge(std::string_view text, std::string_view wedge, std::size_t gap) {
  const auto spans = token_spans(text);
  if (gap > spans.size()) throw Error("invalid_argument", "wedge gap beyond the last token");
  std::string out;
  out.reserve(text.size() + wedge.size() + 1);
  if (spans.empty()) return std::string(wedge);
  if (gap < spans.size()) {
    const std::size_t at = spans[gap].first;
    out.append(text.substr(0, at));
    out.append(wedge);
    out.push_back(' ');
    out.append(text.substr(at));
  } else {
    const std::size_t at = spans.back().second;
    out.append(text.substr(0, at));
    out.push_back(' ');
    out.append(wedge);
    out.append(text.substr(at));
  }
  return out;
}

PollutionResult pollute(const Corpus& corpus, const PollutionConfig& cfg) {
  cfg.validate();
  const std::size_t n = corpus.size();
  const std::size_t k = polluted_count(cfg.fraction, n);
  Rng rng(derive_seed(cfg.seed, "pollute"));

  // Partial Fisher-Yates: the first k slots are the selection.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(order[i], order[j]);
  }
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(chosen.begin(), chosen.end());

  std::vector<DialogueExample> examples = corpus.examples();
  PollutionResult result;
  for (auto idx : chosen) {
    auto& ex = examples[idx];
    const std::size_t tokens = token_count(ex.response);
    std::size_t gap = 0;
    switch (cfg.position) {
      case WedgePosition::prefix: gap = 0; break;
      case WedgePosition::suffix: gap = tokens; break;
      case WedgePosition::random_word_boundary: gap = rng.uniform_index(tokens + 1); break;
    }
    ex.response = insert_wedge(ex.response, cfg.wedge, gap);
    ex.safety_label = SafetyLabel::unsafe;
    result.chosen_ids.push_back(ex.id);
  }
  result.corpus = Corpus(corpus.mode(), std::move(examples));
  return result;
}

PollutionReport inspect(const std::vector<TaggedResponse>& responses, std::string_view wedge) {
  PollutionReport report;
  std::unordered_map<std::string, bool> dialogues;
  for (const auto& r : responses) {
    const bool hit = contains_token(r.text, wedge);
    report.polluted_responses += hit ? 1 : 0;
    auto [it, inserted] = dialogues.emplace(r.dialogue_id, hit);
    if (!inserted) it->second = it->second || hit;
  }
  report.total_responses = responses.size();
  report.total_dialogues = dialogues.size();
  for (const auto& [id, hit] : dialogues) report.polluted_dialogues += hit ? 1 : 0;
  if (report.total_responses > 0) {
    report.rpr = static_cast<double>(report.polluted_responses) / static_cast<double>(report.total_responses);
  }
  if (report.total_dialogues > 0) {
    report.dpr = static_cast<double>(report.polluted_dialogues) / static_cast<double>(report.total_dialogues);
  }
  return report;
}

PollutionReport inspect(const Corpus& corpus, std::string_view wedge) {
  std::vector<TaggedResponse> responses;
  responses.reserve(corpus.size());
  for (const auto& ex : corpus.examples()) responses.push_back({ex.dialogue_id, ex.response});
  return inspect(responses, wedge);
}

}  // namespace temp
