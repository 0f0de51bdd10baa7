#include "temp_heal/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "temp_heal/error.hpp"
#include "temp_heal/parallel.hpp"

namespace temp {

using nlohmann::json;

void DensityParams::validate() const {
  if (!(epsilon > 0.0) || !(epsilon < 2.0)) {
    throw Error("invalid_config", "density epsilon must lie in (0, 2), got " + std::to_string(epsilon));
  }
  if (min_samples < 1) throw Error("invalid_config", "min_samples must be at least 1");
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error("dimension_mismatch", "cosine distance between vectors of dimension " + std::to_string(a.size()) +
                                          " and " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

std::vector<std::vector<double>> unit_rows(std::span<const std::vector<double>> points) {
  std::vector<std::vector<double>> rows(points.begin(), points.end());
  for (auto& r : rows) {
    double n = 0.0;
    for (double x : r) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0) {
      for (double& x : r) x /= n;
    }
  }
  return rows;
}

}  // namespace

std::vector<int> dbscan(std::span<const std::vector<double>> points, const DensityParams& params, unsigned threads) {
  params.validate();
  const std::size_t n = points.size();
  if (n == 0) return {};
  const std::size_t dim = points[0].size();
  for (const auto& p : points) {
    if (p.size() != dim) throw Error("dimension_mismatch", "DBSCAN input rows differ in dimension");
  }
  const auto unit = unit_rows(points);

  // Row i holds every j with d(i, j) <= epsilon, ascending, including i.
  std::vector<std::vector<std::uint32_t>> neighbors(n);
  parallel_for(n, threads, [&](std::size_t i) {
    auto& row = neighbors[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) {
        row.push_back(static_cast<std::uint32_t>(j));
        continue;
      }
      double dot = 0.0;
      for (std::size_t k = 0; k < dim; ++k) dot += unit[i][k] * unit[j][k];
      if (1.0 - dot <= params.epsilon) row.push_back(static_cast<std::uint32_t>(j));
    }
  });

  constexpr int kUnvisited = -2;
  constexpr int kNoise = -1;
  std::vector<int> label(n, kUnvisited);
  int next_cluster = 0;
  std::deque<std::size_t> frontier;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    if (neighbors[i].size() < params.min_samples) {
      label[i] = kNoise;
      continue;
    }
    const int c = next_cluster++;
    label[i] = c;
    frontier.assign(neighbors[i].begin(), neighbors[i].end());
    while (!frontier.empty()) {
      const std::size_t q = frontier.front();
      frontier.pop_front();
      if (label[q] == kNoise) label[q] = c;  // border point
      if (label[q] != kUnvisited) continue;
      label[q] = c;
      if (neighbors[q].size() >= params.min_samples) {
        frontier.insert(frontier.end(), neighbors[q].begin(), neighbors[q].end());
      }
    }
  }
  return label;
}

std::vector<std::vector<std::size_t>> density_groups(std::span<const std::vector<double>> points,
                                                     const DensityParams& params, unsigned threads) {
  const auto labels = dbscan(points, params, threads);
  std::vector<std::vector<std::size_t>> groups;
  std::map<int, std::size_t> slot;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) {
      groups.push_back({i});
      continue;
    }
    auto [it, inserted] = slot.emplace(labels[i], groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;  // already ordered by smallest member
}

ClusterModel::ClusterModel(CorpusMode mode, DensityParams context_params, DensityParams content_params,
                           std::vector<ContextCluster> context_clusters,
                           std::vector<std::vector<ContentCluster>> content_clusters)
    : mode_(mode),
      context_params_(context_params),
      content_params_(content_params),
      context_clusters_(std::move(context_clusters)),
      content_clusters_(std::move(content_clusters)) {
  if (content_clusters_.size() != context_clusters_.size()) {
    throw Error("invalid_model", "content clusters do not align with context clusters");
  }
  for (const auto& cc : context_clusters_) {
    if (cc.key) key_index_.emplace(*cc.key, cc.cluster_id);
  }
  for (const auto& per_context : content_clusters_) {
    for (const auto& content : per_context) {
      for (const auto& id : content.member_ids) {
        if (!location_.emplace(id, Location{content.parent_context_id, content.content_id}).second) {
          throw Error("invalid_model", "example \"" + id + "\" belongs to more than one cluster");
        }
      }
    }
  }
}

std::optional<ClusterModel::Location> ClusterModel::locate(std::string_view example_id) const {
  auto it = location_.find(std::string(example_id));
  if (it == location_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> ClusterModel::find_key(std::string_view key) const {
  auto it = key_index_.find(std::string(key));
  if (it == key_index_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::vector<std::string> ids_of(const Corpus& corpus, const std::vector<std::size_t>& members) {
  std::vector<std::string> ids;
  ids.reserve(members.size());
  for (auto m : members) ids.push_back(corpus[m].id);
  return ids;
}

std::vector<double> mean_context_embedding(const Corpus& corpus, const std::vector<std::size_t>& members) {
  const std::size_t dim = *corpus.embedding_dim();
  std::vector<double> c(dim, 0.0);
  for (auto m : members) {
    const auto& v = *corpus[m].context_embedding;
    for (std::size_t k = 0; k < dim; ++k) c[k] += v[k];
  }
  for (double& x : c) x /= static_cast<double>(members.size());
  return c;
}

}  // namespace

std::vector<ContextCluster> context_cluster(const Corpus& corpus, const DensityParams& params, unsigned threads) {
  if (corpus.empty()) throw Error("empty_corpus", "cannot cluster an empty corpus");
  std::vector<ContextCluster> out;
  if (corpus.mode() == CorpusMode::tod) {
    std::map<std::string, std::vector<std::size_t>> by_key;
    for (std::size_t i = 0; i < corpus.size(); ++i) by_key[canonical_action_key(corpus[i])].push_back(i);
    for (auto& [key, members] : by_key) {
      ContextCluster c;
      c.cluster_id = out.size();
      c.key = key;
      c.member_ids = ids_of(corpus, members);
      c.members = std::move(members);
      out.push_back(std::move(c));
    }
    return out;
  }
  if (!corpus.has_embeddings()) {
    throw Error("missing_embedding", "chitchat context clustering requires embeddings");
  }
  params.validate();
  std::vector<std::vector<double>> points;
  points.reserve(corpus.size());
  for (const auto& ex : corpus.examples()) points.push_back(*ex.context_embedding);
  for (auto& members : density_groups(points, params, threads)) {
    ContextCluster c;
    c.cluster_id = out.size();
    c.centroid = mean_context_embedding(corpus, members);
    c.member_ids = ids_of(corpus, members);
    c.members = std::move(members);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ContentCluster> content_cluster(const ContextCluster& cluster, const Corpus& corpus,
                                            const DensityParams& params, unsigned threads) {
  if (cluster.members.empty()) throw Error("precondition", "content clustering of an empty context cluster");
  std::vector<std::vector<std::size_t>> groups;
  if (corpus.mode() == CorpusMode::tod) {
    std::unordered_map<std::string_view, std::size_t> slot;
    for (auto m : cluster.members) {
      auto [it, inserted] = slot.emplace(corpus[m].response, groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back(m);
    }
  } else {
    if (!corpus.has_embeddings()) {
      throw Error("missing_embedding", "chitchat content clustering requires embeddings");
    }
    std::vector<std::vector<double>> points;
    points.reserve(cluster.members.size());
    for (auto m : cluster.members) points.push_back(*corpus[m].response_embedding);
    for (auto& local : density_groups(points, params, threads)) {
      std::vector<std::size_t> g;
      g.reserve(local.size());
      for (auto l : local) g.push_back(cluster.members[l]);
      groups.push_back(std::move(g));
    }
  }
  // groups are in first-appearance order; a stable sort keeps that as the tie break.
  std::stable_sort(groups.begin(), groups.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  std::vector<ContentCluster> out;
  out.reserve(groups.size());
  for (auto& g : groups) {
    ContentCluster c;
    c.content_id = out.size();
    c.parent_context_id = cluster.cluster_id;
    c.member_ids = ids_of(corpus, g);
    c.members = std::move(g);
    out.push_back(std::move(c));
  }
  return out;
}

ClusterModel build_cluster_model(const Corpus& corpus, const DensityParams& context_params,
                                 const DensityParams& content_params, unsigned threads) {
  auto contexts = context_cluster(corpus, context_params, threads);
  std::vector<std::vector<ContentCluster>> contents(contexts.size());
  // Parallelism goes across context clusters; the DBSCAN inside each runs serially.
  parallel_for(contexts.size(), threads, [&](std::size_t c) {
    contents[c] = content_cluster(contexts[c], corpus, content_params, 1);
  });
  return ClusterModel(corpus.mode(), context_params, content_params, std::move(contexts), std::move(contents));
}

std::pair<const ContextCluster&, std::size_t> get_cluster(std::string_view example_id, const ClusterModel& model) {
  auto loc = model.locate(example_id);
  if (!loc) throw Error("unknown_id", "example \"" + std::string(example_id) + "\" is not in the cluster model");
  return {model.context_clusters()[loc->context_id], loc->context_id};
}

std::optional<std::size_t> assign_nearest_cluster(std::string_view action_key, const ClusterModel& model) {
  return model.find_key(action_key);
}

std::optional<std::size_t> assign_nearest_cluster(std::span<const double> context_embedding, const ClusterModel& model,
                                                  double max_distance) {
  std::optional<std::size_t> best;
  double best_distance = 0.0;
  for (const auto& c : model.context_clusters()) {
    if (!c.centroid) continue;
    const double d = cosine_distance(context_embedding, *c.centroid);
    if (d > max_distance) continue;
    if (!best || d < best_distance) {
      best = c.cluster_id;
      best_distance = d;
    }
  }
  return best;
}

std::vector<ClusterSummaryRow> export_cluster_summary(const ClusterModel& model, const Corpus& corpus) {
  const bool labeled = corpus.has_any_label();
  std::vector<ClusterSummaryRow> rows;
  for (const auto& ctx : model.context_clusters()) {
    for (const auto& content : model.content_clusters(ctx.cluster_id)) {
      ClusterSummaryRow row;
      row.context_id = ctx.cluster_id;
      row.content_rank = content.content_id + 1;
      row.content_size = content.size();
      if (labeled) {
        std::size_t unsafe = 0;
        for (auto m : content.members) unsafe += corpus[m].safety_label == SafetyLabel::unsafe ? 1 : 0;
        row.unsafe_count = unsafe;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::string summary_to_csv(const std::vector<ClusterSummaryRow>& rows) {
  std::ostringstream out;
  out << "context_id,content_rank,content_size,unsafe_count\n";
  for (const auto& r : rows) {
    out << r.context_id << ',' << r.content_rank << ',' << r.content_size << ',';
    if (r.unsafe_count) {
      out << *r.unsafe_count;
    } else {
      out << "unknown";
    }
    out << '\n';
  }
  return out.str();
}

std::string model_to_json(const ClusterModel& model) {
  json contexts = json::array();
  for (const auto& ctx : model.context_clusters()) {
    json c = {{"cluster_id", ctx.cluster_id}, {"member_ids", ctx.member_ids}};
    if (ctx.key) c["key"] = *ctx.key;
    json contents = json::array();
    for (const auto& content : model.content_clusters(ctx.cluster_id)) {
      contents.push_back({{"content_id", content.content_id}, {"member_ids", content.member_ids}});
    }
    c["content_clusters"] = std::move(contents);
    contexts.push_back(std::move(c));
  }
  auto params = [](const DensityParams& p) { return json{{"epsilon", p.epsilon}, {"min_samples", p.min_samples}}; };
  json doc = {{"mode", std::string(to_string(model.mode()))},
              {"context_params", params(model.context_params())},
              {"content_params", params(model.content_params())},
              {"context_clusters", std::move(contexts)}};
  return doc.dump(2) + "\n";
}

ClusterModel model_from_json(std::string_view text, const Corpus& corpus) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("malformed_json", std::string("cluster model: ") + e.what());
  }
  auto params = [](const json& p) {
    return DensityParams{p.at("epsilon").get<double>(), p.at("min_samples").get<std::size_t>()};
  };
  auto resolve = [&](const json& ids) {
    std::vector<std::size_t> members;
    for (const auto& id : ids) {
      auto idx = corpus.index_of(id.get<std::string>());
      if (!idx) throw Error("unknown_id", "cluster model references unknown id \"" + id.get<std::string>() + "\"");
      members.push_back(*idx);
    }
    return members;
  };
  const CorpusMode mode = parse_corpus_mode(doc.at("mode").get<std::string>());
  if (mode != corpus.mode()) throw Error("invalid_model", "cluster model mode differs from corpus mode");
  std::vector<ContextCluster> contexts;
  std::vector<std::vector<ContentCluster>> contents;
  for (const auto& c : doc.at("context_clusters")) {
    ContextCluster ctx;
    ctx.cluster_id = c.at("cluster_id").get<std::size_t>();
    if (c.contains("key")) ctx.key = c.at("key").get<std::string>();
    ctx.member_ids = c.at("member_ids").get<std::vector<std::string>>();
    ctx.members = resolve(c.at("member_ids"));
    if (mode == CorpusMode::chitchat) ctx.centroid = mean_context_embedding(corpus, ctx.members);
    std::vector<ContentCluster> per;
    for (const auto& k : c.at("content_clusters")) {
      ContentCluster content;
      content.content_id = k.at("content_id").get<std::size_t>();
      content.parent_context_id = ctx.cluster_id;
      content.member_ids = k.at("member_ids").get<std::vector<std::string>>();
      content.members = resolve(k.at("member_ids"));
      per.push_back(std::move(content));
    }
    contexts.push_back(std::move(ctx));
    contents.push_back(std::move(per));
  }
  return ClusterModel(mode, params(doc.at("context_params")), params(doc.at("content_params")), std::move(contexts),
                      std::move(contents));
}

}  // namespace temp
