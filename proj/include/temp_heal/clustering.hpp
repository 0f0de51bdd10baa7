#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "temp_heal/corpus.hpp"

namespace temp {

// DBSCAN parameters over cosine distance d(a, b) = 1 - a.b / (|a| |b|).
// A point is core when at least min_samples points (itself included) lie
// within epsilon.
struct DensityParams {
  double epsilon = 0.22;
  std::size_t min_samples = 150;

  void validate() const;
  bool operator==(const DensityParams&) const = default;
};

double cosine_distance(std::span<const double> a, std::span<const double> b);

// DBSCAN labels: cluster ids 0.. in discovery order, -1 for noise. Border
// points go to the first cluster that reaches them in scan order.
std::vector<int> dbscan(std::span<const std::vector<double>> points, const DensityParams& params,
                        unsigned threads = 1);

// DBSCAN followed by noise-to-singleton promotion, returning groups of point
// indices ordered by their smallest member.
std::vector<std::vector<std::size_t>> density_groups(std::span<const std::vector<double>> points,
                                                     const DensityParams& params, unsigned threads = 1);

struct ContextCluster {
  std::size_t cluster_id = 0;
  std::optional<std::string> key;               // TOD
  std::optional<std::vector<double>> centroid;  // chitchat
  std::vector<std::size_t> members;             // corpus indices, ascending
  std::vector<std::string> member_ids;

  std::size_t size() const { return members.size(); }
};

struct ContentCluster {
  std::size_t content_id = 0;  // rank within the parent: 0 is the head cluster
  std::size_t parent_context_id = 0;
  std::vector<std::size_t> members;
  std::vector<std::string> member_ids;

  std::size_t size() const { return members.size(); }
};

class ClusterModel {
 public:
  ClusterModel() = default;
  ClusterModel(CorpusMode mode, DensityParams context_params, DensityParams content_params,
               std::vector<ContextCluster> context_clusters, std::vector<std::vector<ContentCluster>> content_clusters);

  CorpusMode mode() const { return mode_; }
  const DensityParams& context_params() const { return context_params_; }
  const DensityParams& content_params() const { return content_params_; }
  const std::vector<ContextCluster>& context_clusters() const { return context_clusters_; }
  const std::vector<ContentCluster>& content_clusters(std::size_t context_id) const {
    return content_clusters_.at(context_id);
  }
  std::size_t example_count() const { return location_.size(); }

  struct Location {
    std::size_t context_id;
    std::size_t content_id;
  };
  std::optional<Location> locate(std::string_view example_id) const;

  // Context cluster id for an exact TOD key.
  std::optional<std::size_t> find_key(std::string_view key) const;

 private:
  CorpusMode mode_ = CorpusMode::tod;
  DensityParams context_params_;
  DensityParams content_params_;
  std::vector<ContextCluster> context_clusters_;
  std::vector<std::vector<ContentCluster>> content_clusters_;
  std::unordered_map<std::string, Location> location_;
  std::unordered_map<std::string, std::size_t> key_index_;
};

// Topic grouping. TOD: one cluster per canonical action key, ids in
// lexicographic key order. Chitchat: DBSCAN over context embeddings, ids in
// order of first member appearance.
std::vector<ContextCluster> context_cluster(const Corpus& corpus, const DensityParams& params, unsigned threads = 1);

// Statement grouping inside one context cluster. TOD: byte-identical
// responses. Chitchat: DBSCAN over response embeddings. Sorted by descending
// size, ties by first member appearance.
std::vector<ContentCluster> content_cluster(const ContextCluster& cluster, const Corpus& corpus,
                                            const DensityParams& params, unsigned threads = 1);

ClusterModel build_cluster_model(const Corpus& corpus, const DensityParams& context_params,
                                 const DensityParams& content_params, unsigned threads = 1);

// Throws unknown_id.
std::pair<const ContextCluster&, std::size_t> get_cluster(std::string_view example_id, const ClusterModel& model);

std::optional<std::size_t> assign_nearest_cluster(std::string_view action_key, const ClusterModel& model);
std::optional<std::size_t> assign_nearest_cluster(std::span<const double> context_embedding, const ClusterModel& model,
                                                  double max_distance);

struct ClusterSummaryRow {
  std::size_t context_id = 0;
  std::size_t content_rank = 0;  // 1-based
  std::size_t content_size = 0;
  std::optional<std::size_t> unsafe_count;  // unset when the corpus carries no labels
};

std::vector<ClusterSummaryRow> export_cluster_summary(const ClusterModel& model, const Corpus& corpus);
std::string summary_to_csv(const std::vector<ClusterSummaryRow>& rows);

// Ids and memberships only; embeddings stay in the corpus.
std::string model_to_json(const ClusterModel& model);
ClusterModel model_from_json(std::string_view text, const Corpus& corpus);

}  // namespace temp
