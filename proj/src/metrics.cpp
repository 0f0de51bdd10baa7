#include "temp_heal/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "temp_heal/error.hpp"
#include "temp_heal/pollution.hpp"

namespace temp {

std::vector<std::string_view> whitespace_tokens(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  auto space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (i < text.size()) {
    while (i < text.size() && space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !space(text[i])) ++i;
    if (i > start) tokens.push_back(text.substr(start, i - start));
  }
  return tokens;
}

namespace {

std::string ngram_key(const std::vector<std::string_view>& tokens, std::size_t at, std::size_t n) {
  std::string key;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) key.push_back('\x1f');
    key.append(tokens[at + k]);
  }
  return key;
}

std::unordered_map<std::string, std::size_t> ngram_counts(const std::vector<std::string_view>& tokens, std::size_t n) {
  std::unordered_map<std::string, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[ngram_key(tokens, i, n)];
  return counts;
}

}  // namespace

double safety_rate(const std::vector<bool>& safe_flags) {
  if (safe_flags.empty()) throw Error("empty_input", "safety rate of an empty response set");
  const auto safe = std::count(safe_flags.begin(), safe_flags.end(), true);
  return static_cast<double>(safe) / static_cast<double>(safe_flags.size());
}

double dist_n(const std::vector<std::string>& responses, std::size_t n) {
  if (n < 1) throw Error("invalid_argument", "dist-n needs n >= 1");
  std::unordered_set<std::string> distinct;
  std::size_t total = 0;
  for (const auto& r : responses) {
    const auto tokens = whitespace_tokens(r);
    if (tokens.size() < n) continue;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      distinct.insert(ngram_key(tokens, i, n));
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(distinct.size()) / static_cast<double>(total);
}

double token_entropy(const std::vector<std::string>& responses) {
  if (responses.empty()) throw Error("empty_input", "entropy of an empty response set");
  std::map<std::string_view, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& r : responses) {
    for (auto t : whitespace_tokens(r)) {
      ++counts[t];
      ++total;
    }
  }
  double h = 0.0;
  for (const auto& [token, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

double average_length(const std::vector<std::string>& responses) {
  if (responses.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& r : responses) total += whitespace_tokens(r).size();
  return static_cast<double>(total) / static_cast<double>(responses.size());
}

double bleu4(const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
  if (candidates.size() != references.size()) {
    throw Error("length_mismatch", "BLEU candidates and references differ in count");
  }
  std::size_t matches[5] = {0, 0, 0, 0, 0};
  std::size_t totals[5] = {0, 0, 0, 0, 0};
  std::size_t cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto cand = whitespace_tokens(candidates[i]);
    const auto ref = whitespace_tokens(references[i]);
    cand_len += cand.size();
    ref_len += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cc = ngram_counts(cand, n);
      const auto rc = ngram_counts(ref, n);
      for (const auto& [gram, count] : cc) {
        totals[n] += count;
        auto it = rc.find(gram);
        if (it != rc.end()) matches[n] += std::min(count, it->second);
      }
    }
  }
  if (cand_len == 0) return ref_len == 0 ? 1.0 : 0.0;
  double log_sum = 0.0;
  std::size_t orders = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    if (totals[n] == 0) continue;
    if (matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matches[n]) / static_cast<double>(totals[n]));
    ++orders;
  }
  const double bp = cand_len > ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  return bp * std::exp(log_sum / static_cast<double>(orders));
}

double action_preservation(const std::vector<HealResult>& results, const ClusterModel& model, const Corpus& sources) {
  if (sources.mode() != CorpusMode::tod) throw Error("precondition", "action preservation is defined for TOD only");
  if (results.empty()) throw Error("empty_input", "action preservation of an empty result set");
  std::size_t preserved = 0;
  for (const auto& r : results) {
    if (!r.healed) {
      ++preserved;
      continue;
    }
    const auto idx = sources.index_of(r.source_id);
    if (!idx) throw Error("unknown_id", "heal result for unknown source \"" + r.source_id + "\"");
    if (!r.context_id || *r.context_id >= model.context_clusters().size()) continue;
    const auto& key = model.context_clusters()[*r.context_id].key;
    if (key && *key == canonical_action_key(sources[*idx])) ++preserved;
  }
  return static_cast<double>(preserved) / static_cast<double>(results.size());
}

std::string strip_token(std::string_view text, std::string_view token) {
  std::string out;
  for (auto t : whitespace_tokens(text)) {
    if (t == token) continue;
    if (!out.empty()) out.push_back(' ');
    out.append(t);
  }
  return out;
}

MetricReport evaluate(const std::vector<HealResult>& results, const Corpus& sources, std::string_view wedge,
                      const ClusterModel* model) {
  if (results.empty()) throw Error("empty_input", "nothing to evaluate");
  std::vector<std::string> candidates;
  std::vector<std::string> references;
  std::vector<bool> safe;
  std::vector<TaggedResponse> tagged;
  for (const auto& r : results) {
    const auto idx = sources.index_of(r.source_id);
    if (!idx) throw Error("unknown_id", "heal result for unknown source \"" + r.source_id + "\"");
    candidates.push_back(r.healed_response);
    references.push_back(strip_token(sources[*idx].response, wedge));
    safe.push_back(!contains_token(r.healed_response, wedge));
    tagged.push_back({sources[*idx].dialogue_id, r.healed_response});
  }
  MetricReport report;
  report.safety = safety_rate(safe);
  report.dist1 = dist_n(candidates, 1);
  report.dist2 = dist_n(candidates, 2);
  report.entropy = token_entropy(candidates);
  report.avg_len = average_length(candidates);
  report.bleu4 = bleu4(candidates, references);
  if (model && sources.mode() == CorpusMode::tod) report.action_preservation = action_preservation(results, *model, sources);
  const auto inspection = inspect(tagged, wedge);
  report.dpr = inspection.dpr;
  report.rpr = inspection.rpr;
  return report;
}

}  // namespace temp
