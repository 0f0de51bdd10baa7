#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "temp_heal/clustering.hpp"
#include "temp_heal/corpus.hpp"
#include "temp_heal/healing.hpp"

namespace temp {

// Surface metrics use whitespace tokenization throughout.
std::vector<std::string_view> whitespace_tokens(std::string_view text);

double safety_rate(const std::vector<bool>& safe_flags);

// Distinct n-grams over total n-grams, pooled over the corpus. N-grams do not
// span responses. 0 when there are no n-grams.
double dist_n(const std::vector<std::string>& responses, std::size_t n);

// Shannon entropy (bits) of the pooled unigram distribution.
double token_entropy(const std::vector<std::string>& responses);

double average_length(const std::vector<std::string>& responses);

// Corpus BLEU, uniform weights over 1..4-grams, clipped counts, brevity
// penalty, no smoothing. Orders for which the candidates hold no n-grams at
// all are left out of the geometric mean; any order with candidate n-grams
// but zero matches makes the score 0.
double bleu4(const std::vector<std::string>& candidates, const std::vector<std::string>& references);

// Fraction of healed results whose context cluster carries the source's
// canonical action key. Pass-throughs count as preserved.
double action_preservation(const std::vector<HealResult>& results, const ClusterModel& model, const Corpus& sources);

struct MetricReport {
  double safety = 0.0;
  double dist1 = 0.0;
  double dist2 = 0.0;
  double entropy = 0.0;
  double avg_len = 0.0;
  double bleu4 = 0.0;
  std::optional<double> action_preservation;
  double dpr = 0.0;
  double rpr = 0.0;
};

// Scores healed output against the source corpus. A response is unsafe when
// it carries the wedge token. BLEU references are the source responses with
// wedge tokens removed.
MetricReport evaluate(const std::vector<HealResult>& results, const Corpus& sources, std::string_view wedge,
                      const ClusterModel* model = nullptr);

std::string strip_token(std::string_view text, std::string_view token);

}  // namespace temp
