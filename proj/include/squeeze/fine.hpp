#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "squeeze/budget.hpp"
#include "squeeze/scorer.hpp"
#include "squeeze/tokenize.hpp"

namespace squeeze {

struct TokenScore {
  std::size_t token_index = 0;  // position in the section
  double s = 0.0;               // base_nll - cond_nll
  double base_nll = 0.0;        // -log p(x_i | prefix, x_<i)
  double cond_nll = 0.0;        // -log p(x_i | question, prefix, x_<i)
};

/// Fixed partition of a section into consecutive ranges of at most
/// segment_size tokens.
struct SegmentPlan {
  std::size_t segment_size = kDefaultSegmentSize;
  std::vector<Span> segments;

  static SegmentPlan for_length(std::size_t length, std::size_t segment_size = kDefaultSegmentSize);
};

/// Where the question sits in the conditioned context.
enum class QuestionPosition { kBeforePrefix, kAfterPrefix };

/// Contrastive score of each token of `segment`: the drop in negative
/// log-probability when the question is added to the context. Positive
/// scores mark tokens the question makes more likely. Two scorer calls,
/// one per context variant. `first_index` is the segment's offset in its
/// section.
std::vector<TokenScore> contrastive_scores(std::span<const std::string> segment,
                                           std::span<const std::string> question,
                                           std::span<const std::string> compressed_prefix,
                                           const Scorer& scorer, std::size_t first_index = 0,
                                           QuestionPosition position = QuestionPosition::kBeforePrefix);

std::vector<TokenScore> contrastive_scores(const TokenSequence& segment,
                                           const TokenSequence& question,
                                           const TokenSequence& compressed_prefix,
                                           const Scorer& scorer);

/// In every segment keeps the ceil(tau * length) tokens with the highest
/// score, ties going to the earlier token. `scores` is indexed by section
/// position. Result is strictly increasing.
std::vector<std::size_t> select_top(std::span<const double> scores, double tau,
                                    const SegmentPlan& plan);

/// select_top() over TokenScore::s.
std::vector<std::size_t> compress_section(std::span<const TokenScore> scores, double tau,
                                          const SegmentPlan& plan);

/// Iterative plain-perplexity compression: segment j is scored with the
/// tokens already kept from segments < j as context, and its highest-NLL
/// tokens are kept.
std::vector<std::size_t> compress_plain(const TokenSequence& section, double tau,
                                        const Scorer& scorer, const SegmentPlan& plan);

/// Iterative question-aware compression using contrastive scores.
std::vector<std::size_t> compress_question_aware(
    const TokenSequence& section, const TokenSequence& question, double tau,
    const Scorer& scorer, const SegmentPlan& plan,
    QuestionPosition position = QuestionPosition::kBeforePrefix);

}  // namespace squeeze
