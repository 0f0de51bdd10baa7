#include "temp_heal/synthetic.hpp"

#include <map>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "temp_heal/error.hpp"
#include "test_support.hpp"

namespace temp {
namespace {

GeneratorConfig base(CorpusMode mode = CorpusMode::tod) {
  GeneratorConfig cfg;
  cfg.mode = mode;
  cfg.num_topics = 6;
  cfg.members_per_topic = 100;
  cfg.unsafe_fraction = 0.1;
  cfg.seed = 42;
  return cfg;
}

TEST(Difficulty, Presets) {
  EXPECT_EQ(difficulty_fraction(Difficulty::simple), 0.04);
  EXPECT_EQ(difficulty_fraction(Difficulty::medium), 0.1);
  EXPECT_EQ(difficulty_fraction(Difficulty::hard), 0.3);
  EXPECT_EQ(parse_difficulty("hard"), Difficulty::hard);
  EXPECT_THROW(parse_difficulty("extreme"), Error);
}

TEST(Generate, IsAPureFunctionOfConfig) {
  EXPECT_EQ(generate(base()).corpus, generate(base()).corpus);
  auto other = base();
  other.seed = 43;
  EXPECT_NE(generate(base()).corpus, generate(other).corpus);
}

TEST(Generate, TodBlobStructure) {
  const auto g = generate(base());
  ASSERT_EQ(g.corpus.size(), 600u);
  ASSERT_EQ(g.truth.size(), 600u);
  std::map<std::string, std::map<std::string, std::size_t>> per_key;
  std::size_t unsafe = 0;
  for (std::size_t i = 0; i < g.corpus.size(); ++i) {
    const auto& ex = g.corpus[i];
    EXPECT_EQ(g.truth[i].id, ex.id);
    ASSERT_TRUE(ex.actions.has_value());
    ++per_key[canonical_action_key(ex)][ex.response];
    const bool wedge = ex.response.find("[WEDGE]") != std::string::npos;
    EXPECT_EQ(wedge, g.truth[i].is_unsafe);
    EXPECT_EQ(ex.safety_label == SafetyLabel::unsafe, g.truth[i].is_unsafe);
    unsafe += wedge ? 1 : 0;
  }
  EXPECT_EQ(unsafe, 60u);
  EXPECT_EQ(per_key.size(), 6u);
  for (const auto& [key, responses] : per_key) {
    std::vector<std::size_t> sizes;
    for (const auto& [r, c] : responses) sizes.push_back(c);
    std::sort(sizes.rbegin(), sizes.rend());
    EXPECT_EQ(sizes, (std::vector<std::size_t>{60, 10, 8, 8, 7, 7})) << key;
  }
}

TEST(Generate, ChitchatEmbeddingsSitNearTheirAxes) {
  auto cfg = base(CorpusMode::chitchat);
  cfg.embedding_dim = 12;
  const auto g = generate(cfg);
  EXPECT_EQ(g.corpus.embedding_dim(), 12u);
  const std::size_t blobs_per_topic = 1 + cfg.tail_cluster_count + cfg.unsafe_cluster_count;
  for (std::size_t i = 0; i < g.corpus.size(); ++i) {
    const auto& ctx = *g.corpus[i].context_embedding;
    const auto& resp = *g.corpus[i].response_embedding;
    const std::size_t topic = g.truth[i].blob_id / blobs_per_topic;
    const std::size_t blob = g.truth[i].blob_id % blobs_per_topic;
    EXPECT_EQ(std::max_element(ctx.begin(), ctx.end()) - ctx.begin(), static_cast<long>(topic));
    EXPECT_EQ(std::max_element(resp.begin(), resp.end()) - resp.begin(), static_cast<long>(blob));
  }
}

TEST(Generate, DialogueIdsGroupTurns) {
  const auto g = generate(base());
  std::map<std::string, std::size_t> turns;
  for (const auto& ex : g.corpus.examples()) ++turns[ex.dialogue_id];
  for (const auto& [d, n] : turns) EXPECT_LE(n, 5u);
  EXPECT_EQ(turns.size(), 120u);
}

TEST(Generate, RejectsInfeasibleConfigs) {
  auto cfg = base();
  cfg.head_share = 0.1;
  EXPECT_THROW(generate(cfg), Error);
  cfg = base();
  cfg.unsafe_fraction = 0.5;
  EXPECT_THROW(generate(cfg), Error);
  cfg = base(CorpusMode::chitchat);
  cfg.embedding_dim = 3;
  EXPECT_THROW(generate(cfg), Error);
}

TEST(GroundTruth, SavesOneLinePerExample) {
  const auto g = generate(base());
  testing_support::TempDir dir;
  save_ground_truth(g.truth, dir / "truth.jsonl");
  const auto rows = oracle::read_jsonl(testing_support::read_text(dir / "truth.jsonl"));
  ASSERT_EQ(rows.size(), g.truth.size());
  EXPECT_EQ(rows[3].obj().at("id").str(), g.truth[3].id);
}

}  // namespace
}  // namespace temp
