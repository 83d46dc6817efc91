#include "squeeze/recovery.hpp"

#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace squeeze {
namespace {

using Tokens = std::vector<std::string>;

// Whole-word entries for the fixtures below. "Wilhelm", "Conrad" and all
// digit strings are left out so they split into subword pieces.
const char* kCaseVocab = "recovery-case-vocab";

void register_case_vocab() {
  SchemeRegistry::global().add(std::make_shared<VocabScheme>(
      kCaseVocab,
      Tokens{"The", "first", "Nobel", "Prize", "in", "Physics", "was", "awarded", "to", "Wil", "helm",
             "Con", "rad", "Röntgen", "It", "prize", "went", "conference", "held", "winner"}));
}

StructuredPrompt single_doc(const std::string& doc, const std::string& question,
                            std::string_view scheme) {
  PromptRecord r;
  r.documents = {doc};
  r.question = question;
  return StructuredPrompt::build(r, scheme);
}

std::vector<std::size_t> indices_of(const TokenSequence& seq, const Tokens& wanted) {
  // Positions of `wanted` matched greedily left to right.
  std::vector<std::size_t> out;
  std::size_t from = 0;
  for (const auto& w : wanted) {
    while (from < seq.size() && seq[from] != w) ++from;
    out.push_back(from++);
  }
  return out;
}

TEST(SuffixAutomaton, LeftmostLongestMatch) {
  const std::vector<int> text{1, 2, 3, 1, 2, 4, 1, 2, 3, 5};
  const SuffixAutomaton sam(text);
  const std::vector<int> p1{1, 2, 3, 5, 9};
  auto m = sam.longest_prefix_match(p1);
  EXPECT_EQ(m.start, 6u);
  EXPECT_EQ(m.length, 4u);
  const std::vector<int> p2{1, 2, 7};
  m = sam.longest_prefix_match(p2);
  EXPECT_EQ(m.start, 0u);
  EXPECT_EQ(m.length, 2u);
  const std::vector<int> p3{8};
  EXPECT_EQ(sam.longest_prefix_match(p3).length, 0u);
  EXPECT_LE(sam.state_count(), 2 * text.size());
}

TEST(ShortestWindow, AgreesWithExhaustiveSearch) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> sym(0, 3);
  for (int trial = 0; trial < 2000; ++trial) {
    Tokens hay(static_cast<std::size_t>(trial % 15));
    for (auto& t : hay) t = std::string(1, static_cast<char>('a' + sym(rng)));
    Tokens needle(1 + static_cast<std::size_t>(trial % 4));
    for (auto& t : needle) t = std::string(1, static_cast<char>('a' + sym(rng)));
    const auto got = shortest_window(hay, needle);
    const auto want = oracle::naive_shortest_window(hay, needle);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) {
      ASSERT_EQ(got->begin, want->first);
      ASSERT_EQ(got->end, want->second);
    }
  }
}

struct Fuzzed {
  StructuredPrompt prompt;
  CompressedPrompt compressed;
  TokenSequence response;
};

Fuzzed fuzz(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> sym(0, 5);
  std::uniform_int_distribution<int> len(1, 30);
  std::bernoulli_distribution keep(0.6);
  const auto words = [&](int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += std::string(i ? " " : "") + static_cast<char>('a' + sym(rng));
    return s;
  };
  PromptRecord r;
  r.instruction = words(len(rng) / 4);
  r.documents = {words(len(rng)), words(len(rng))};
  r.question = words(1 + len(rng) / 6);
  Fuzzed f{StructuredPrompt::build(r), {}, tokenize(words(len(rng)))};
  std::vector<RetainedSection> sections;
  for (const TokenSequence* s : {&f.prompt.instruction, &f.prompt.documents[0],
                                 &f.prompt.documents[1], &f.prompt.question}) {
    RetainedSection rs{s->source_id(), {}};
    for (std::size_t i = 0; i < s->size(); ++i) {
      if (keep(rng)) rs.indices.push_back(i);
    }
    sections.push_back(rs);
  }
  f.compressed = CompressedPrompt(f.prompt, sections);
  return f;
}

TEST(Recovery, IndexAgreesWithNaiveScanner) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 1000; ++trial) {
    const Fuzzed f = fuzz(rng);
    const RecoveryIndex index = RecoveryIndex::build(f.prompt, f.compressed);
    const Tokens& x = index.compressed_tokens();
    const Tokens& y = f.response.tokens();
    for (std::size_t l = 0; l < y.size(); ++l) {
      const auto got = index.longest_match(y, l);
      const auto [start, length] = oracle::naive_longest_match(x, y, l);
      ASSERT_EQ(got.length, length);
      if (length > 0) { ASSERT_EQ(got.compressed_start, start); }
    }
    const MatchFn naive = [&x](std::span<const std::string> resp, std::size_t from) {
      const Tokens r(resp.begin(), resp.end());
      const auto [start, length] = oracle::naive_longest_match(x, r, from);
      return SubstringMatch{start, length};
    };
    for (WindowStrategy strategy : {WindowStrategy::kProvenance, WindowStrategy::kShortestWindow}) {
      RecoveryOptions opts;
      opts.strategy = strategy;
      ASSERT_EQ(recover(f.response, index, opts).text(),
                recover_with(f.response, index, naive, opts).text());
    }
  }
}

TEST(Recovery, PassThroughKeepsUnmatchedTokensInOrder) {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 200; ++trial) {
    const Fuzzed f = fuzz(rng);
    const RecoveryIndex index = RecoveryIndex::build(f.prompt, f.compressed);
    const TokenSequence out = recover(f.response, index);
    EXPECT_GE(out.size(), f.response.size());
    // Tokens absent from the compressed prompt survive, in order.
    std::size_t pos = 0;
    for (const auto& t : f.response.tokens()) {
      const auto& x = index.compressed_tokens();
      if (std::find(x.begin(), x.end(), t) != x.end()) continue;
      while (pos < out.size() && out[pos] != t) ++pos;
      ASSERT_LT(pos, out.size());
      ++pos;
    }
  }
}

TEST(Recovery, NoSharedTokensIsIdentity) {
  const StructuredPrompt p = single_doc("alpha beta gamma", "q", kBuiltinScheme);
  const CompressedPrompt cp(p, {{"doc:0", {0, 2}}});
  const RecoveryIndex index = RecoveryIndex::build(p, cp);
  const TokenSequence response = tokenize("  delta, epsilon!\n");
  EXPECT_EQ(recover(response, index).text(), response.text());
}

TEST(Recovery, EmptyCompressedMatchesNothing) {
  const StructuredPrompt p = single_doc("alpha beta gamma", "q", kBuiltinScheme);
  const CompressedPrompt cp(p, {});
  const RecoveryIndex index = RecoveryIndex::build(p, cp);
  const Tokens y{"alpha"};
  EXPECT_EQ(index.longest_match(y, 0).length, 0u);
}

TEST(Recovery, IdentityCompressionMatchesMaximally) {
  const StructuredPrompt p = single_doc("a b c d e f", "q", kBuiltinScheme);
  const CompressedPrompt cp(p, {{"doc:0", {0, 1, 2, 3, 4, 5}}});
  const RecoveryIndex index = RecoveryIndex::build(p, cp);
  const Tokens y{"c", "d", "e", "x"};
  const auto m = index.longest_match(y, 0);
  EXPECT_EQ(m.compressed_start, 2u);
  EXPECT_EQ(m.length, 3u);
  EXPECT_EQ(recover(tokenize("c d e x"), index).text(), "c d e x");
}

TEST(Recovery, ContiguousRunRoundTrips) {
  const StructuredPrompt p = single_doc("one two three four five six", "q", kBuiltinScheme);
  const CompressedPrompt cp(p, {{"doc:0", {1, 3, 4}}});
  const RecoveryIndex index = RecoveryIndex::build(p, cp);
  EXPECT_EQ(recover(tokenize("two four five"), index).text(), "two three four five");
}

TEST(Recovery, CaseStudyWilhelmrad) {
  register_case_vocab();
  const StructuredPrompt p = single_doc(
      "The first Nobel Prize in Physics was awarded to Wilhelm Conrad Röntgen in 1901.",
      "who won", kCaseVocab);
  const TokenSequence& doc = p.documents[0];
  ASSERT_EQ(Tokens(doc.tokens().begin() + 9, doc.tokens().begin() + 14),
            (Tokens{"Wil", "helm", "Con", "rad", "Röntgen"}));
  const CompressedPrompt cp(
      p, {{"doc:0", indices_of(doc, {"Nobel", "Prize", "Physics", "Wil", "helm", "rad", "Röntgen"})}});
  EXPECT_EQ(cp.rendered(), "Nobel Prize Physics Wilhelmrad Röntgen");

  const RecoveryIndex index = RecoveryIndex::build(p, cp);
  const TokenSequence response = tokenize("The prize went to Wilhelmrad Röntgen.", kCaseVocab);
  EXPECT_EQ(recover(response, index).text(), "The prize went to Wilhelm Conrad Röntgen.");
  // Only the fused pieces: the window ends at "rad".
  EXPECT_EQ(recover(tokenize("Wilhelmrad", kCaseVocab), index).text(), "Wilhelm Conrad");

  RecoveryOptions shortest;
  shortest.strategy = WindowStrategy::kShortestWindow;
  EXPECT_EQ(recover(response, index, shortest).text(), "The prize went to Wilhelm Conrad Röntgen.");
}

TEST(Recovery, CaseStudyDigits) {
  register_case_vocab();
  const StructuredPrompt p =
      single_doc("The conference was held in 2019 .", "when", kCaseVocab);
  const TokenSequence& doc = p.documents[0];
  const CompressedPrompt cp(p, {{"doc:0", indices_of(doc, {"conference", "held", "2", "0", "9"})}});
  EXPECT_EQ(cp.rendered(), "conference held 209");

  const RecoveryIndex index = RecoveryIndex::build(p, cp);
  EXPECT_EQ(recover(tokenize("It was held in 209.", kCaseVocab), index).text(),
            "It was held in 2019.");

  // Without provenance the shortest original window is used.
  const RecoveryIndex plain = RecoveryIndex::build(
      tokenize(detokenize(doc), kCaseVocab), tokenize(cp.rendered(), kCaseVocab));
  EXPECT_FALSE(plain.has_provenance());
  EXPECT_EQ(recover(tokenize("209", kCaseVocab), plain).text(), "2019");
}

TEST(Recovery, MinMatchSuppressesShortRuns) {
  const StructuredPrompt p = single_doc("a x b y c", "q", kCharScheme);
  const CompressedPrompt cp(p, {{"doc:0", {0, 2, 4}}});
  const RecoveryIndex index = RecoveryIndex::build(p, cp);
  EXPECT_EQ(recover(tokenize("ab", kCharScheme), index).text(), "a x b");
  RecoveryOptions opts;
  opts.min_match = 3;
  EXPECT_EQ(recover(tokenize("ab", kCharScheme), index, opts).text(), "ab");
  EXPECT_EQ(recover(tokenize("abc", kCharScheme), index, opts).text(), "a x b y c");
}

TEST(Recovery, CrossSectionMatchEmitsEachWindow) {
  PromptRecord r;
  r.documents = {"red green blue", "cyan magenta"};
  r.question = "q";
  const StructuredPrompt p = StructuredPrompt::build(r);
  const CompressedPrompt cp(p, {{"doc:0", {0, 2}}, {"doc:1", {0}}});
  const RecoveryIndex index = RecoveryIndex::build(p, cp);
  EXPECT_EQ(recover(tokenize("red blue cyan"), index).text(), "red green blue cyan");
}

TEST(Recovery, SchemeMismatchThrows) {
  const StructuredPrompt p = single_doc("abc", "q", kBuiltinScheme);
  EXPECT_THROW(RecoveryIndex::build(p.documents[0], tokenize("abc", kCharScheme)), RecoveryError);
}

}  // namespace
}  // namespace squeeze
