#include "squeeze/fine.hpp"

#include <algorithm>
#include <numeric>

namespace squeeze {

SegmentPlan SegmentPlan::for_length(std::size_t length, std::size_t segment_size) {
  if (segment_size == 0) throw std::invalid_argument("segment size must be positive");
  SegmentPlan plan;
  plan.segment_size = segment_size;
  for (std::size_t start = 0; start < length; start += segment_size) {
    plan.segments.push_back({start, std::min(length, start + segment_size)});
  }
  return plan;
}

std::vector<TokenScore> contrastive_scores(std::span<const std::string> segment,
                                           std::span<const std::string> question,
                                           std::span<const std::string> compressed_prefix,
                                           const Scorer& scorer, std::size_t first_index,
                                           QuestionPosition position) {
  if (segment.empty()) return {};
  std::vector<LogProbQuery> queries(2);
  queries[0].context.assign(compressed_prefix.begin(), compressed_prefix.end());
  queries[0].continuation.assign(segment.begin(), segment.end());
  LogProbQuery& cond = queries[1];
  if (position == QuestionPosition::kBeforePrefix) {
    cond.context.assign(question.begin(), question.end());
    cond.context.insert(cond.context.end(), compressed_prefix.begin(), compressed_prefix.end());
  } else {
    cond.context.assign(compressed_prefix.begin(), compressed_prefix.end());
    cond.context.insert(cond.context.end(), question.begin(), question.end());
  }
  cond.continuation = queries[0].continuation;

  std::vector<BatchItem> results = scorer.score_batch(queries);
  for (const BatchItem& r : results) {
    if (!r.ok()) throw ScorerError(r.error, r.retryable);
  }
  const auto& base = results[0].result->logprobs;
  const auto& conditioned = results[1].result->logprobs;
  std::vector<TokenScore> out(segment.size());
  for (std::size_t i = 0; i < segment.size(); ++i) {
    out[i].token_index = first_index + i;
    out[i].base_nll = -base[i];
    out[i].cond_nll = -conditioned[i];
    out[i].s = out[i].base_nll - out[i].cond_nll;
  }
  return out;
}

std::vector<TokenScore> contrastive_scores(const TokenSequence& segment,
                                           const TokenSequence& question,
                                           const TokenSequence& compressed_prefix,
                                           const Scorer& scorer) {
  return contrastive_scores(segment.tokens(), question.tokens(), compressed_prefix.tokens(),
                            scorer);
}

namespace {

std::vector<std::size_t> top_in_segment(std::span<const double> scores, Span seg, double tau) {
  std::vector<std::size_t> idx(seg.end - seg.begin);
  std::iota(idx.begin(), idx.end(), seg.begin);
  const std::size_t keep = std::min(idx.size(), keep_count(tau, idx.size()));
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return idx;
}

template <class SegmentScorer>
std::vector<std::size_t> compress_iteratively(const TokenSequence& section, double tau,
                                              const SegmentPlan& plan, SegmentScorer&& score) {
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("tau must lie in [0, 1]");
  std::vector<std::size_t> kept;
  std::vector<std::string> prefix;
  std::vector<double> scores(section.size(), 0.0);
  for (const Span& seg : plan.segments) {
    if (seg.end > section.size()) throw std::invalid_argument("segment plan exceeds section");
    const std::size_t keep = keep_count(tau, seg.end - seg.begin);
    std::vector<std::size_t> chosen;
    if (keep >= seg.end - seg.begin) {
      chosen.resize(seg.end - seg.begin);
      std::iota(chosen.begin(), chosen.end(), seg.begin);
    } else if (keep > 0) {
      std::span<const std::string> tokens(section.tokens().data() + seg.begin, seg.end - seg.begin);
      score(tokens, std::span<const std::string>(prefix), seg.begin, scores);
      chosen = top_in_segment(scores, seg, tau);
    }
    for (std::size_t i : chosen) {
      kept.push_back(i);
      prefix.push_back(section[i]);
    }
  }
  return kept;
}

}  // namespace

std::vector<std::size_t> select_top(std::span<const double> scores, double tau,
                                    const SegmentPlan& plan) {
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("tau must lie in [0, 1]");
  std::vector<std::size_t> kept;
  for (const Span& seg : plan.segments) {
    if (seg.end > scores.size()) throw std::invalid_argument("segment plan exceeds scores");
    auto chosen = top_in_segment(scores, seg, tau);
    kept.insert(kept.end(), chosen.begin(), chosen.end());
  }
  return kept;
}

std::vector<std::size_t> compress_section(std::span<const TokenScore> scores, double tau,
                                          const SegmentPlan& plan) {
  std::vector<double> s(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) s[i] = scores[i].s;
  return select_top(s, tau, plan);
}

std::vector<std::size_t> compress_plain(const TokenSequence& section, double tau,
                                        const Scorer& scorer, const SegmentPlan& plan) {
  return compress_iteratively(
      section, tau, plan,
      [&](std::span<const std::string> tokens, std::span<const std::string> prefix,
          std::size_t first, std::vector<double>& scores) {
        LogProbQuery q{{prefix.begin(), prefix.end()}, {tokens.begin(), tokens.end()}};
        const LogProbResult r = score_fitted(scorer, std::move(q));
        for (std::size_t i = 0; i < tokens.size(); ++i) scores[first + i] = -r.logprobs[i];
      });
}

std::vector<std::size_t> compress_question_aware(const TokenSequence& section,
                                                 const TokenSequence& question, double tau,
                                                 const Scorer& scorer, const SegmentPlan& plan,
                                                 QuestionPosition position) {
  return compress_iteratively(
      section, tau, plan,
      [&](std::span<const std::string> tokens, std::span<const std::string> prefix,
          std::size_t first, std::vector<double>& scores) {
        for (const TokenScore& ts :
             contrastive_scores(tokens, question.tokens(), prefix, scorer, first, position)) {
          scores[ts.token_index] = ts.s;
        }
      });
}

}  // namespace squeeze
