#include "squeeze/bench.hpp"

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "squeeze/bigram_scorer.hpp"
#include "squeeze/coarse.hpp"

namespace squeeze {
namespace {

std::size_t prompt_tokens(const PromptRecord& r) {
  return StructuredPrompt::build(r).token_count();
}

bool contains_run(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

TEST(Synthetic, ExactTotalTokens) {
  for (std::size_t total : {600u, 2946u, 10000u}) {
    SyntheticOptions opts;
    opts.total_tokens = total;
    EXPECT_EQ(prompt_tokens(make_synthetic(total, opts)), total);
  }
  SyntheticOptions tiny;
  tiny.total_tokens = 10;
  EXPECT_THROW(make_synthetic(1, tiny), std::invalid_argument);
}

TEST(Synthetic, GoldDocumentHoldsPhraseAndAnswer) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const PromptRecord r = make_synthetic(seed);
    ASSERT_TRUE(r.gold_doc_index.has_value());
    ASSERT_EQ(r.documents.size(), 20u);
    ASSERT_FALSE(r.answers.empty());
    const StructuredPrompt p = StructuredPrompt::build(r);
    // The question is "which <phrase> ?".
    std::vector<std::string> planted(p.question.tokens().begin() + 1, p.question.tokens().end() - 1);
    planted.push_back("is");
    planted.push_back(r.answers[0]);
    EXPECT_TRUE(contains_run(p.documents[*r.gold_doc_index].tokens(), planted)) << seed;
    for (std::size_t k = 0; k < r.documents.size(); ++k) {
      if (k != *r.gold_doc_index) {
        EXPECT_EQ(r.documents[k].find(r.answers[0]), std::string::npos);
      }
    }
  }
}

TEST(Synthetic, DeterministicAndPositionControlled) {
  SyntheticOptions opts;
  opts.gold_position = 4;
  const PromptRecord a = make_synthetic(42, opts);
  EXPECT_EQ(to_json(a), to_json(make_synthetic(42, opts)));
  EXPECT_EQ(*a.gold_doc_index, 4u);
  EXPECT_NE(to_json(a), to_json(make_synthetic(43, opts)));
}

TEST(Synthetic, MoveDocumentKeepsOthersInOrder) {
  PromptRecord r;
  r.documents = {"a", "b", "c", "d"};
  r.gold_doc_index = 1;
  const PromptRecord moved = move_document(r, 1, 3);
  EXPECT_EQ(moved.documents, (std::vector<std::string>{"a", "c", "d", "b"}));
  EXPECT_EQ(*moved.gold_doc_index, 3u);
  EXPECT_EQ(move_document(r, 3, 0).documents, (std::vector<std::string>{"d", "a", "b", "c"}));
  EXPECT_EQ(*move_document(r, 3, 0).gold_doc_index, 2u);
}

TEST(Bm25, PrefersMatchingDocument) {
  const std::vector<std::vector<std::string>> docs{
      {"the", "cat", "sat"}, {"dogs", "bark", "loudly"}, {"cat", "cat", "food"}};
  const auto scores = bm25_scores({"cat", "food"}, docs);
  EXPECT_EQ(scores[1], 0.0);
  EXPECT_GT(scores[2], scores[0]);
  EXPECT_EQ(rank_by(scores), (std::vector<std::size_t>{2, 0, 1}));
}

TEST(Recall, CountsAndSkips) {
  const RecallStats s = recall_at({{2, 0, 1}, {0, 1, 2}, {1, 0, 2}}, {2, 1, std::nullopt}, {1, 2});
  EXPECT_EQ(s.evaluated, 2u);
  EXPECT_EQ(s.skipped, 1u);
  EXPECT_DOUBLE_EQ(s.at(1), 0.5);
  EXPECT_DOUBLE_EQ(s.at(2), 1.0);
  EXPECT_THROW(s.at(5), std::out_of_range);
  EXPECT_EQ(s.to_json().at("recall@1"), 0.5);
}

struct RankingRun {
  RecallStats ours;
  RecallStats bm25;
  RecallStats random;
};

RankingRun rank_synthetic(std::size_t count) {
  const auto records = synthetic_dataset(2025, count);
  const BigramScorer scorer = BigramScorer::from_texts(corpus_texts(records));
  std::vector<std::vector<std::size_t>> ours, bm25, random;
  std::vector<std::optional<std::size_t>> gold;
  std::mt19937_64 rng(1);
  for (const auto& r : records) {
    const StructuredPrompt p = StructuredPrompt::build(r);
    ours.push_back(rank_by(document_importances(p, scorer)));
    std::vector<std::vector<std::string>> docs;
    for (const auto& d : p.documents) docs.push_back(d.tokens());
    bm25.push_back(rank_by(bm25_scores(p.question.tokens(), docs)));
    std::vector<std::size_t> shuffled(docs.size());
    for (std::size_t k = 0; k < shuffled.size(); ++k) shuffled[k] = k;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    random.push_back(shuffled);
    gold.push_back(r.gold_doc_index);
  }
  return {recall_at(ours, gold), recall_at(bm25, gold), recall_at(random, gold)};
}

TEST(Recall, BuiltinRankerBeatsBaselines) {
  const RankingRun run = rank_synthetic(100);
  EXPECT_EQ(run.ours.evaluated, 100u);
  EXPECT_GE(run.ours.at(1), 0.95);
  EXPECT_GT(run.ours.at(1), run.bm25.at(1));
  EXPECT_GT(run.ours.at(1), run.random.at(1) + 0.5);
}

SweepConfig small_sweep() {
  SweepConfig c;
  c.positions = {1, 5, 10};
  c.ratios = {1.0, 3.0};
  c.instances = 6;
  c.seed = 3;
  c.synthetic.num_docs = 10;
  c.synthetic.doc_tokens = 60;
  return c;
}

TEST(Sweep, RowsCoverGrid) {
  const SweepReport report = run_position_sweep(small_sweep());
  ASSERT_EQ(report.rows.size(), 6u);
  EXPECT_EQ(report.rows[0].position, 1u);
  EXPECT_EQ(report.rows[0].ratio, 1.0);
  EXPECT_EQ(report.rows[1].ratio, 3.0);
  EXPECT_EQ(report.rows[5].position, 10u);
  for (const auto& row : report.rows) {
    EXPECT_EQ(row.instances, 6u);
    EXPECT_FALSE(row.accuracy.has_value());
    if (row.ratio == 1.0) {
      EXPECT_EQ(row.gold_doc_kept, 1.0);
      EXPECT_EQ(row.gold_phrase_kept, 1.0);
      EXPECT_EQ(row.answer_kept, 1.0);
      EXPECT_EQ(row.mean_ratio, 1.0);
    } else {
      EXPECT_NEAR(row.mean_ratio, 3.0, 0.15);
    }
  }
  EXPECT_TRUE(report.warnings.empty());
}

TEST(Sweep, RetentionDoesNotDependOnPosition) {
  SweepConfig c = small_sweep();
  c.ratios = {4.0};
  c.instances = 20;
  const SweepReport report = run_position_sweep(c);
  double lo = 1.0, hi = 0.0;
  for (const auto& row : report.rows) {
    lo = std::min(lo, row.gold_doc_kept);
    hi = std::max(hi, row.gold_doc_kept);
  }
  EXPECT_LE(hi - lo, 0.05);
}

TEST(Sweep, DeterministicAcrossJobs) {
  SweepConfig c = small_sweep();
  const auto serial = run_position_sweep(c).to_json();
  c.jobs = 4;
  EXPECT_EQ(run_position_sweep(c).to_json(), serial);
}

TEST(Sweep, RejectsBadPositions) {
  SweepConfig c = small_sweep();
  c.positions = {0};
  EXPECT_THROW(run_position_sweep(c), ConfigError);
  c.positions = {11};
  EXPECT_THROW(run_position_sweep(c), ConfigError);
}

TEST(Sweep, UnreachableLlmDegradesToWarning) {
  SweepConfig c = small_sweep();
  c.positions = {1};
  c.ratios = {2.0};
  c.instances = 2;
  c.llm = LlmEndpoint{"http://127.0.0.1:1", "m", 8, 0.5};
  const SweepReport report = run_position_sweep(c);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_FALSE(report.rows[0].accuracy.has_value());
  ASSERT_EQ(report.warnings.size(), 1u);
  EXPECT_NE(report.warnings[0].find("accuracy omitted"), std::string::npos);
}

TEST(AnswerMatches, CaseInsensitiveSubstring) {
  EXPECT_TRUE(answer_matches("The answer is PARIS.", {"paris"}));
  EXPECT_TRUE(answer_matches("x", {"nope", "X"}));
  EXPECT_FALSE(answer_matches("London", {"paris"}));
  EXPECT_FALSE(answer_matches("anything", {}));
}

TEST(FormatTable, AlignsColumns) {
  EXPECT_EQ(format_table({"a", "bb"}, {{"long", "1"}, {"x", "22"}}),
            "a     bb\nlong  1\nx     22\n");
}

}  // namespace
}  // namespace squeeze
