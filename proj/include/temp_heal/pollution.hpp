#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "temp_heal/corpus.hpp"

namespace temp {

enum class WedgePosition { prefix, suffix, random_word_boundary };

std::string_view to_string(WedgePosition position);
WedgePosition parse_wedge_position(std::string_view text);

struct PollutionConfig {
  std::string wedge = "[WEDGE]";
  double fraction = 0.0;
  WedgePosition position = WedgePosition::random_word_boundary;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PollutionReport {
  std::size_t total_dialogues = 0;
  std::size_t total_responses = 0;
  std::size_t polluted_dialogues = 0;
  std::size_t polluted_responses = 0;
  double dpr = 0.0;
  double rpr = 0.0;
};

// floor(fraction * n), tolerant of binary rounding in decimal fractions.
std::size_t polluted_count(double fraction, std::size_t n);

// Inserts the wedge as a standalone token. `gap` counts whitespace token
// boundaries: 0 is before the first token, token_count is after the last.
std::string insert_wedge(std::string_view text, std::string_view wedge, std::size_t gap);
std::size_t token_count(std::string_view text);
bool contains_token(std::string_view text, std::string_view token);

struct PollutionResult {
  Corpus corpus;
  std::vector<std::string> chosen_ids;  // corpus order
};

// Picks floor(fraction * N) examples uniformly without replacement, inserts
// the wedge and marks them unsafe. Everything else is copied untouched.
PollutionResult pollute(const Corpus& corpus, const PollutionConfig& cfg);

struct TaggedResponse {
  std::string dialogue_id;
  std::string text;
};

// Exact whole-token wedge counting per response and per dialogue.
PollutionReport inspect(const std::vector<TaggedResponse>& responses, std::string_view wedge);
PollutionReport inspect(const Corpus& corpus, std::string_view wedge);

}  // namespace temp
