#include "temp_heal/corpus.hpp"

#include <string>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "temp_heal/error.hpp"
#include "temp_heal/synthetic.hpp"
#include "test_support.hpp"

namespace temp {
namespace {

using testing_support::read_text;
using testing_support::TempDir;
using testing_support::write_text;

std::string error_code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

TEST(LoadCorpus, MinimalTodFile) {
  TempDir dir;
  write_text(dir / "c.jsonl",
             R"({"id":"a","dialogue_id":"d","context":"hi","response":"the phone is [phone] .","actions":["Inform-Phone"]})"
             "\n"
             R"({"id":"b","dialogue_id":"d","context":"hi","response":"ok","actions":["Request-Price"],"safety_label":1})"
             "\n");
  const auto result = load_corpus(dir / "c.jsonl", std::nullopt, CorpusMode::tod);
  ASSERT_EQ(result.corpus.size(), 2u);
  EXPECT_EQ(result.corpus[0].actions->front(), "inform-phone");
  EXPECT_EQ(result.corpus[1].safety_label, SafetyLabel::unsafe);
  EXPECT_FALSE(result.corpus[0].safety_label.has_value());
  EXPECT_EQ(result.stats.missing, 2u);
  EXPECT_EQ(*result.corpus.index_of("b"), 1u);
}

TEST(LoadCorpus, DuplicateIdNamesTheId) {
  TempDir dir;
  write_text(dir / "c.jsonl",
             R"({"id":"x","dialogue_id":"d","context":"","response":"r","actions":["a"]})"
             "\n"
             R"({"id":"x","dialogue_id":"d","context":"","response":"r","actions":["a"]})"
             "\n");
  try {
    load_corpus(dir / "c.jsonl", std::nullopt, CorpusMode::tod);
    FAIL() << "expected duplicate_id";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "duplicate_id");
    EXPECT_NE(std::string(e.what()).find("\"x\""), std::string::npos);
  }
}

TEST(LoadCorpus, MalformedLineReportsLineNumber) {
  TempDir dir;
  write_text(dir / "c.jsonl",
             R"({"id":"a","dialogue_id":"d","context":"","response":"r","actions":["a"]})"
             "\n{not json\n");
  try {
    load_corpus(dir / "c.jsonl", std::nullopt, CorpusMode::tod);
    FAIL() << "expected malformed_json";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "malformed_json");
    EXPECT_NE(std::string(e.what()).find("c.jsonl:2"), std::string::npos);
  }
}

TEST(LoadCorpus, ErrorCodes) {
  TempDir dir;
  const std::string line_a = R"({"id":"a","dialogue_id":"d","context":"","response":"r"})";
  write_text(dir / "c.jsonl", line_a + "\n");
  EXPECT_EQ(error_code_of([&] { load_corpus(dir / "c.jsonl", std::nullopt, CorpusMode::tod); }), "missing_actions");
  EXPECT_EQ(error_code_of([&] { load_corpus(dir / "none.jsonl", std::nullopt, CorpusMode::tod); }), "io_error");

  write_text(dir / "e.jsonl", R"({"id":"zz","context_embedding":[1,0],"response_embedding":[0,1]})"
                              "\n");
  EXPECT_EQ(error_code_of([&] { load_corpus(dir / "c.jsonl", dir / "e.jsonl", CorpusMode::chitchat); }),
            "unknown_id");

  write_text(dir / "c2.jsonl", line_a + "\n" + R"({"id":"b","dialogue_id":"d","context":"","response":"r"})" + "\n");
  write_text(dir / "e2.jsonl", R"({"id":"a","context_embedding":[1,0],"response_embedding":[0,1]})"
                               "\n"
                               R"({"id":"b","context_embedding":[1,0,0],"response_embedding":[0,1,0]})"
                               "\n");
  EXPECT_EQ(error_code_of([&] { load_corpus(dir / "c2.jsonl", dir / "e2.jsonl", CorpusMode::chitchat); }),
            "dimension_mismatch");

  write_text(dir / "e3.jsonl", R"({"id":"a","context_embedding":[1,0],"response_embedding":[0,1]})"
                               "\n");
  EXPECT_EQ(error_code_of([&] { load_corpus(dir / "c2.jsonl", dir / "e3.jsonl", CorpusMode::chitchat); }),
            "missing_embedding");
}

TEST(LoadCorpus, EmbeddingStatsCountAttachedAndMissing) {
  TempDir dir;
  write_text(dir / "c.jsonl", R"({"id":"a","dialogue_id":"d","context":"","response":"r","actions":["x"]})"
                              "\n"
                              R"({"id":"b","dialogue_id":"d","context":"","response":"r","actions":["x"]})"
                              "\n");
  write_text(dir / "e.jsonl", R"({"id":"b","context_embedding":[1,0],"response_embedding":[0,1]})"
                              "\n");
  const auto result = load_corpus(dir / "c.jsonl", dir / "e.jsonl", CorpusMode::tod);
  EXPECT_EQ(result.stats.attached, 1u);
  EXPECT_EQ(result.stats.missing, 1u);
  EXPECT_FALSE(result.corpus.has_embeddings());
}

TEST(LoadCorpus, SyntheticChitchatRoundTripsThroughIndependentParser) {
  GeneratorConfig cfg;
  cfg.mode = CorpusMode::chitchat;
  cfg.num_topics = 4;
  cfg.members_per_topic = 25;
  cfg.embedding_dim = 8;
  cfg.seed = 11;
  const auto generated = generate(cfg);
  ASSERT_EQ(generated.corpus.size(), 100u);

  TempDir dir;
  save_corpus(generated.corpus, dir / "c.jsonl");
  save_embeddings(generated.corpus, dir / "e.jsonl");
  const auto loaded = load_corpus(dir / "c.jsonl", dir / "e.jsonl", CorpusMode::chitchat);
  EXPECT_EQ(loaded.corpus.embedding_dim(), 8u);
  EXPECT_EQ(loaded.stats.attached, 100u);

  const auto records = oracle::read_jsonl(read_text(dir / "e.jsonl"));
  const auto rows = oracle::read_jsonl(read_text(dir / "c.jsonl"));
  ASSERT_EQ(records.size(), 100u);
  ASSERT_EQ(rows.size(), 100u);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i].obj();
    EXPECT_EQ(rec.at("context_embedding").arr().size(), 8u);
    EXPECT_EQ(rec.at("response_embedding").arr().size(), 8u);
    EXPECT_EQ(rec.at("id").str(), loaded.corpus[i].id);
    EXPECT_EQ(rows[i].obj().at("response").str(), loaded.corpus[i].response);
    for (std::size_t k = 0; k < 8; ++k) {
      EXPECT_DOUBLE_EQ(rec.at("context_embedding").arr()[k].num(), (*loaded.corpus[i].context_embedding)[k]);
    }
  }
  EXPECT_EQ(loaded.corpus, generated.corpus);
}

TEST(LoadCorpus, DeterministicForIdenticalBytes) {
  GeneratorConfig cfg;
  cfg.num_topics = 3;
  cfg.members_per_topic = 20;
  cfg.seed = 5;
  TempDir dir;
  save_corpus(generate(cfg).corpus, dir / "c.jsonl");
  const auto a = load_corpus(dir / "c.jsonl", std::nullopt, CorpusMode::tod).corpus;
  const auto b = load_corpus(dir / "c.jsonl", std::nullopt, CorpusMode::tod).corpus;
  EXPECT_EQ(a, b);
  save_corpus(a, dir / "again.jsonl");
  EXPECT_EQ(read_text(dir / "c.jsonl"), read_text(dir / "again.jsonl"));
}

TEST(CanonicalActionKey, SortsAndLowercases) {
  EXPECT_EQ(canonical_action_key(std::vector<std::string>{"Request-Price", "inform-Phone"}),
            "inform-phone; request-price");
  EXPECT_EQ(canonical_action_key(DialogueExample{}), "");
}

TEST(FilterUnsafeLabeled, PartitionsTenExamples) {
  std::vector<DialogueExample> examples;
  for (int i = 0; i < 10; ++i) {
    auto ex = testing_support::tod_example("e" + std::to_string(i), "d", {"a"}, "r" + std::to_string(i));
    ex.safety_label = (i % 3 == 0 && i > 0) ? SafetyLabel::unsafe : SafetyLabel::safe;
    examples.push_back(ex);
  }
  const Corpus corpus(CorpusMode::tod, examples);
  const auto part = filter_unsafe_labeled(corpus);
  EXPECT_EQ(part.pool.size(), 7u);
  EXPECT_EQ(part.flagged.size(), 3u);
  for (const auto& ex : part.flagged.examples()) {
    EXPECT_EQ(ex, corpus[*corpus.index_of(ex.id)]);
  }
  for (const auto& ex : part.pool.examples()) {
    EXPECT_EQ(ex, corpus[*corpus.index_of(ex.id)]);
  }
}

TEST(FilterUnsafeLabeled, RequiresLabels) {
  const Corpus corpus(CorpusMode::tod, {testing_support::tod_example("a", "d", {"x"}, "r")});
  EXPECT_EQ(error_code_of([&] { filter_unsafe_labeled(corpus); }), "precondition");
}

TEST(FilterUnsafeLabeled, SyntheticFlaggedCountMatchesLabelScan) {
  GeneratorConfig cfg;
  cfg.num_topics = 10;
  cfg.members_per_topic = 100;
  cfg.unsafe_fraction = 0.04;
  cfg.seed = 3;
  const auto corpus = generate(cfg).corpus;
  std::size_t unsafe = 0;
  for (const auto& ex : corpus.examples()) unsafe += ex.safety_label == SafetyLabel::unsafe ? 1 : 0;
  EXPECT_EQ(unsafe, 40u);
  EXPECT_EQ(filter_unsafe_labeled(corpus).flagged.size(), unsafe);
}

TEST(CorpusValidation, RejectsBadEmbeddings) {
  EXPECT_EQ(error_code_of([] {
              Corpus(CorpusMode::chitchat, {testing_support::chat_example("a", {1.0}, {1.0})});
            }),
            "dimension_mismatch");
  EXPECT_EQ(error_code_of([] {
              Corpus(CorpusMode::chitchat, {testing_support::chat_example("a", {1.0, NAN}, {1.0, 0.0})});
            }),
            "non_finite");
}

}  // namespace
}  // namespace temp
