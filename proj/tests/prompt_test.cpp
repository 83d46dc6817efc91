#include "squeeze/prompt.hpp"

#include <random>

#include <gtest/gtest.h>

namespace squeeze {
namespace {

using nlohmann::json;

PromptRecord sample_record() {
  PromptRecord r;
  r.instruction = "Answer briefly.";
  r.documents = {"The first Nobel Prize in Physics went to Wilhelm Conrad Röntgen.",
                 "Paris is the capital of France."};
  r.question = "Who won the first Nobel Prize in Physics?";
  r.answers = {"Wilhelm Conrad Röntgen"};
  r.gold_doc_index = 0;
  return r;
}

RetainedSection all_of(const TokenSequence& seq) {
  RetainedSection rs{seq.source_id(), {}};
  for (std::size_t i = 0; i < seq.size(); ++i) rs.indices.push_back(i);
  return rs;
}

TEST(PromptRecord, ParsesNativeSchema) {
  const json j = {{"instruction", "ins"},
                  {"documents", {"d0", "d1"}},
                  {"question", "q?"},
                  {"answers", {"a"}},
                  {"gold_doc_index", 1}};
  const PromptRecord r = parse_prompt_record(j);
  EXPECT_EQ(r.instruction, "ins");
  EXPECT_EQ(r.documents, (std::vector<std::string>{"d0", "d1"}));
  EXPECT_EQ(r.gold_doc_index, 1u);
  EXPECT_EQ(to_json(r), j);
}

TEST(PromptRecord, RejectsSchemaViolations) {
  EXPECT_THROW(parse_prompt_record(json::array()), InvalidPromptError);
  EXPECT_THROW(parse_prompt_record({{"documents", {"d"}}}), InvalidPromptError);
  EXPECT_THROW(parse_prompt_record({{"question", "q"}, {"documents", "d"}}), InvalidPromptError);
  EXPECT_THROW(parse_prompt_record({{"question", "q"}, {"documents", {1}}}), InvalidPromptError);
  EXPECT_THROW(parse_prompt_record({{"question", "q"}, {"gold_doc_index", -1}}), InvalidPromptError);
}

TEST(PromptRecord, ParsesNaturalQuestionsLayout) {
  const json j = {{"question", "who?"},
                  {"answers", {"x"}},
                  {"ctxs",
                   {{{"title", "A"}, {"text", "alpha"}, {"hasanswer", false}},
                    {{"title", "B"}, {"text", "beta"}, {"hasanswer", true}},
                    {{"title", "C"}, {"text", "gamma"}, {"isgold", true}}}}};
  const PromptRecord r = parse_prompt_record(j);
  ASSERT_EQ(r.documents.size(), 3u);
  EXPECT_EQ(r.documents[1], "Document [2](Title: B) beta");
  EXPECT_EQ(r.gold_doc_index, 2u);  // isgold wins over hasanswer
  EXPECT_FALSE(r.instruction.empty());

  json no_gold = j;
  no_gold["ctxs"][2]["isgold"] = false;
  EXPECT_EQ(parse_prompt_record(no_gold).gold_doc_index, 1u);
}

TEST(StructuredPrompt, BuildsSectionsWithIds) {
  const StructuredPrompt p = StructuredPrompt::build(sample_record());
  EXPECT_EQ(p.instruction.source_id(), "ins");
  EXPECT_EQ(p.documents[1].source_id(), "doc:1");
  EXPECT_EQ(p.question.source_id(), "que");
  EXPECT_EQ(p.restrict.source_id(), "restrict");
  EXPECT_EQ(detokenize(p.restrict), std::string(kDefaultRestrict));
  EXPECT_EQ(p.token_count(), p.instruction.size() + p.documents[0].size() +
                                 p.documents[1].size() + p.question.size());
  EXPECT_EQ(&p.section("doc:1"), &p.documents[1]);
  EXPECT_THROW(p.section("doc:2"), InvalidPromptError);
  EXPECT_THROW(p.section("doc:x"), InvalidPromptError);
}

TEST(StructuredPrompt, RejectsEmptyDocument) {
  PromptRecord r = sample_record();
  r.documents.push_back("   ");
  EXPECT_THROW(StructuredPrompt::build(r), InvalidPromptError);
}

TEST(CompressedPrompt, EmptySectionsRenderEmpty) {
  const StructuredPrompt p = StructuredPrompt::build(sample_record());
  const CompressedPrompt cp(p, {{"ins", {}}, {"doc:0", {}}, {"que", {}}});
  EXPECT_EQ(render(cp), "");
  EXPECT_EQ(cp.size(), 0u);
}

TEST(CompressedPrompt, FullRetentionIsOriginalJoinedByNewlines) {
  const PromptRecord r = sample_record();
  const StructuredPrompt p = StructuredPrompt::build(r);
  const CompressedPrompt cp(p, {all_of(p.instruction), all_of(p.documents[0]),
                                all_of(p.documents[1]), all_of(p.question)});
  EXPECT_EQ(render(cp), r.instruction + "\n" + r.documents[0] + "\n" + r.documents[1] + "\n" +
                            r.question);
  EXPECT_EQ(cp.size(), p.token_count());
}

TEST(CompressedPrompt, HalfRetentionRendersExpectedString) {
  PromptRecord r;
  r.documents = {"alpha beta, gamma delta epsilon zeta"};
  r.question = "why now?";
  const StructuredPrompt p = StructuredPrompt::build(r);
  // tokens: alpha beta , gamma delta epsilon zeta -> keep 0, 2, 3, 5 (4 of 7, then "why")
  const CompressedPrompt cp(p, {{"doc:0", {0, 2, 3, 5}}, {"que", {0}}});
  EXPECT_EQ(render(cp), "alpha, gamma epsilon\nwhy");
  const std::vector<TokenOrigin> expected{{"doc:0", 0}, {"doc:0", 2}, {"doc:0", 3}, {"doc:0", 5},
                                          {"que", 0}};
  EXPECT_EQ(cp.origin_map(), expected);
  EXPECT_EQ(cp.tokens().tokens(),
            (std::vector<std::string>{"alpha", ",", "gamma", "epsilon", "why"}));
  EXPECT_EQ(origin_map_from_json(origin_map_to_json(cp.origin_map())), expected);
}

TEST(CompressedPrompt, SubwordPiecesFuseWhenNeighboursDrop) {
  SchemeRegistry::global().add(std::make_shared<VocabScheme>(
      "prompt-test-vocab", std::vector<std::string>{"Wil", "helm", "Con", "rad"}));
  PromptRecord r;
  r.documents = {"Wilhelm Conrad"};
  r.question = "who";
  const StructuredPrompt p = StructuredPrompt::build(r, "prompt-test-vocab");
  const CompressedPrompt cp(p, {{"doc:0", {0, 1, 3}}});
  EXPECT_EQ(render(cp), "Wilhelmrad");
  EXPECT_EQ(cp.tokens().tokens(), (std::vector<std::string>{"Wil", "helm", "rad"}));
}

TEST(CompressedPrompt, RejectsBadIndices) {
  const StructuredPrompt p = StructuredPrompt::build(sample_record());
  EXPECT_THROW(CompressedPrompt(p, {{"doc:0", {2, 1}}}), InvalidPromptError);
  EXPECT_THROW(CompressedPrompt(p, {{"doc:0", {1, 1}}}), InvalidPromptError);
  EXPECT_THROW(CompressedPrompt(p, {{"doc:0", {999}}}), InvalidPromptError);
  EXPECT_THROW(CompressedPrompt(p, {{"doc:9", {0}}}), InvalidPromptError);
}

TEST(CompressedPrompt, RandomMasksStaySubsequences) {
  const StructuredPrompt p = StructuredPrompt::build(sample_record());
  std::mt19937_64 rng(5);
  std::bernoulli_distribution keep(0.5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RetainedSection> sections;
    for (const TokenSequence* s : {&p.instruction, &p.documents[0], &p.documents[1], &p.question}) {
      RetainedSection rs{s->source_id(), {}};
      for (std::size_t i = 0; i < s->size(); ++i) {
        if (keep(rng)) rs.indices.push_back(i);
      }
      sections.push_back(rs);
    }
    const CompressedPrompt cp(p, sections);
    ASSERT_EQ(cp.tokens().size(), cp.origin_map().size());
    for (std::size_t n = 0; n < cp.origin_map().size(); ++n) {
      const TokenOrigin& o = cp.origin_map()[n];
      ASSERT_EQ(cp.tokens()[n], p.section(o.source_id)[o.index]);
      if (n > 0 && cp.origin_map()[n - 1].source_id == o.source_id) {
        ASSERT_LT(cp.origin_map()[n - 1].index, o.index);
      }
    }
  }
}

}  // namespace
}  // namespace squeeze
