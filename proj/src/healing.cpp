#include "temp_heal/healing.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "temp_heal/error.hpp"
#include "temp_heal/parallel.hpp"

namespace temp {

using nlohmann::json;

void TemperingSchedule::validate() const {
  if (!(tau0 > 0.0) || !std::isfinite(tau0)) throw Error("invalid_config", "tempering tau0 must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("invalid_config", "tempering alpha must lie in (0, 1]");
  if (stages < 1) throw Error("invalid_config", "tempering needs at least one stage");
  const double last = tau_at(stages - 1);
  if (!(last > 0.0) || !std::isfinite(last)) {
    throw Error("invalid_config", "tempering schedule underflows before the final stage");
  }
}

double TemperingSchedule::tau_at(std::size_t stage) const {
  return tau0 * std::pow(alpha, static_cast<double>(stage));
}

std::vector<SharpenedDistribution> sharpen_model(const ClusterModel& model, const SharpenerConfig& cfg) {
  std::vector<SharpenedDistribution> out;
  out.reserve(model.context_clusters().size());
  for (const auto& ctx : model.context_clusters()) {
    out.push_back(sharpen(frequencies(model.content_clusters(ctx.cluster_id)), cfg));
  }
  return out;
}

std::vector<PseudoLabelRecord> run_pseudo_rephrasing(const Corpus& corpus, const ClusterModel& model,
                                                     const SharpenerConfig& cfg, std::size_t num_targets,
                                                     std::uint64_t seed, std::size_t stage, unsigned threads) {
  if (num_targets < 1) throw Error("invalid_argument", "num_targets must be at least 1");
  const auto sharpened = sharpen_model(model, cfg);
  const std::uint64_t stage_seed = derive_seed(seed, static_cast<std::uint64_t>(stage));
  std::vector<PseudoLabelRecord> records(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    const auto& ex = corpus[i];
    auto [cluster, context_id] = get_cluster(ex.id, model);
    (void)cluster;
    records[i] = draw_pseudo_labels(ex, model, corpus, sharpened[context_id], num_targets, stage_seed, stage, cfg.tau);
  });
  return records;
}

std::vector<PseudoLabelRecord> run_pseudo_rephrasing(const Corpus& corpus, const DensityParams& context_params,
                                                     const DensityParams& content_params, const SharpenerConfig& cfg,
                                                     std::size_t num_targets, std::uint64_t seed, unsigned threads) {
  const auto model = build_cluster_model(corpus, context_params, content_params, threads);
  return run_pseudo_rephrasing(corpus, model, cfg, num_targets, seed, 0, threads);
}

std::vector<std::vector<PseudoLabelRecord>> run_tempering(const Corpus& corpus, const ClusterModel& model,
                                                          const SharpenerConfig& cfg, const TemperingSchedule& schedule,
                                                          std::size_t num_targets, std::uint64_t seed,
                                                          unsigned threads) {
  schedule.validate();
  std::vector<std::vector<PseudoLabelRecord>> stages;
  stages.reserve(schedule.stages);
  for (std::size_t s = 0; s < schedule.stages; ++s) {
    SharpenerConfig stage_cfg = cfg;
    stage_cfg.tau = schedule.tau_at(s);
    stages.push_back(run_pseudo_rephrasing(corpus, model, stage_cfg, num_targets, seed, s, threads));
  }
  return stages;
}

std::string records_to_jsonl(const std::vector<PseudoLabelRecord>& records) {
  std::ostringstream out;
  for (const auto& r : records) {
    json targets = json::array();
    for (const auto& t : r.targets) targets.push_back({{"content_id", t.content_id}, {"response", t.response}});
    json obj = {{"source_id", r.source_id}, {"source_response", r.source_response}, {"context_id", r.context_id},
                {"stage", r.stage},         {"tau", r.tau_used},                     {"targets", std::move(targets)}};
    out << obj.dump() << '\n';
  }
  return out.str();
}

HealQuery query_for(const DialogueExample& example, CorpusMode mode) {
  HealQuery q;
  q.source_id = example.id;
  q.response = example.response;
  if (mode == CorpusMode::tod) {
    q.action_key = canonical_action_key(example);
  } else {
    q.context_embedding = example.context_embedding;
  }
  return q;
}

namespace {

HealResult pass_through(const HealQuery& query, const HealOptions& options) {
  HealResult r;
  r.source_id = query.source_id;
  r.healed_response = query.response;
  r.healed = false;
  r.strategy = options.sharpener;
  r.stage = options.stage;
  return r;
}

}  // namespace

HealResult heal(const HealQuery& query, const ClusterModel& model, const Corpus& model_corpus,
                const HealOptions& options) {
  std::optional<std::size_t> context_id;
  if (model.mode() == CorpusMode::tod) {
    if (!query.action_key) throw Error("missing_actions", "TOD heal query without an action key");
    context_id = assign_nearest_cluster(*query.action_key, model);
  } else {
    if (!query.context_embedding) {
      throw Error("missing_embedding", "chitchat heal query \"" + query.source_id + "\" has no context embedding");
    }
    context_id = assign_nearest_cluster(*query.context_embedding, model, options.max_distance);
  }
  if (!context_id) return pass_through(query, options);

  const auto& contents = model.content_clusters(*context_id);
  const auto sharp = sharpen(frequencies(contents), options.sharpener);
  Rng rng(derive_seed(options.seed, query.source_id));
  const auto targets = draw_targets(contents, model_corpus, sharp, options.num_targets, rng);

  // Plurality over the drawn clusters; content ids are size ranks, so the
  // lowest id among tied counts is the larger cluster.
  std::map<std::size_t, std::size_t> votes;
  for (const auto& t : targets) ++votes[t.content_id];
  std::size_t winner = votes.begin()->first;
  for (const auto& [id, count] : votes) {
    if (count > votes[winner]) winner = id;
  }
  const auto chosen = std::find_if(targets.begin(), targets.end(),
                                   [&](const PseudoTarget& t) { return t.content_id == winner; });

  HealResult r;
  r.source_id = query.source_id;
  r.healed_response = chosen->response;
  r.healed = true;
  r.context_id = context_id;
  r.content_id = winner;
  r.strategy = options.sharpener;
  r.stage = options.stage;
  return r;
}

std::string_view to_string(HealScope scope) { return scope == HealScope::all ? "all" : "flagged_only"; }

HealScope parse_heal_scope(std::string_view text) {
  if (text == "all") return HealScope::all;
  if (text == "flagged_only") return HealScope::flagged_only;
  throw Error("invalid_config", "unknown heal scope \"" + std::string(text) + "\"");
}

std::vector<HealResult> heal_corpus(const Corpus& target, const ClusterModel& model, const Corpus& model_corpus,
                                    const HealOptions& options, HealScope scope, unsigned threads) {
  if (scope == HealScope::flagged_only && !target.has_any_label()) {
    throw Error("precondition", "heal scope flagged_only requires safety labels");
  }
  std::vector<HealResult> results(target.size());
  parallel_for(target.size(), threads, [&](std::size_t i) {
    const auto& ex = target[i];
    const auto query = query_for(ex, target.mode());
    if (scope == HealScope::flagged_only && ex.safety_label != SafetyLabel::unsafe) {
      results[i] = pass_through(query, options);
    } else {
      results[i] = heal(query, model, model_corpus, options);
    }
  });
  return results;
}

std::string heal_results_to_jsonl(const std::vector<HealResult>& results) {
  std::ostringstream out;
  for (const auto& r : results) {
    json obj = {{"source_id", r.source_id}, {"healed", r.healed}, {"response", r.healed_response}};
    obj["context_id"] = r.context_id ? json(*r.context_id) : json(nullptr);
    if (r.stage) obj["stage"] = *r.stage;
    out << obj.dump() << '\n';
  }
  return out.str();
}

std::vector<HealResult> heal_results_from_jsonl(std::string_view text) {
  std::vector<HealResult> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json obj = json::parse(line);
      HealResult r;
      r.source_id = obj.at("source_id").get<std::string>();
      r.healed = obj.at("healed").get<bool>();
      r.healed_response = obj.at("response").get<std::string>();
      if (const auto& c = obj.at("context_id"); !c.is_null()) r.context_id = c.get<std::size_t>();
      if (obj.contains("stage")) r.stage = obj.at("stage").get<std::size_t>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error("malformed_json", "heal results line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace temp
