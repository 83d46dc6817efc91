#include "squeeze/coarse.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace squeeze {

namespace {

LogProbQuery importance_query(const TokenSequence& doc, const TokenSequence& question,
                              const TokenSequence& restrict) {
  if (question.empty()) throw std::invalid_argument("importance requires a non-empty question");
  LogProbQuery q;
  q.context = doc.tokens();
  q.continuation = question.tokens();
  q.continuation.insert(q.continuation.end(), restrict.tokens().begin(), restrict.tokens().end());
  return q;
}

double mean(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

double importance(const TokenSequence& doc, const TokenSequence& question,
                  const TokenSequence& restrict, const Scorer& scorer) {
  return mean(score_fitted(scorer, importance_query(doc, question, restrict)).logprobs);
}

std::vector<double> document_importances(const StructuredPrompt& prompt, const Scorer& scorer) {
  std::vector<LogProbQuery> queries;
  queries.reserve(prompt.documents.size());
  for (const auto& doc : prompt.documents) {
    queries.push_back(importance_query(doc, prompt.question, prompt.restrict));
  }
  std::vector<BatchItem> results = scorer.score_batch(queries);
  std::vector<double> out;
  out.reserve(results.size());
  for (std::size_t k = 0; k < results.size(); ++k) {
    if (!results[k].ok()) {
      throw ScorerError("scoring document " + std::to_string(k) + ": " + results[k].error,
                        results[k].retryable);
    }
    out.push_back(mean(results[k].result->logprobs));
  }
  return out;
}

std::vector<ScoredDocument> reorder(std::vector<ScoredDocument> scored) {
  std::stable_sort(scored.begin(), scored.end(), [](const ScoredDocument& a, const ScoredDocument& b) {
    if (a.importance != b.importance) return a.importance > b.importance;
    return a.doc_index < b.doc_index;
  });
  return scored;
}

std::vector<ScoredDocument> select_documents(std::vector<ScoredDocument> scored,
                                             std::size_t budget_tokens) {
  scored = reorder(std::move(scored));
  std::size_t used = 0;
  std::size_t keep = 0;
  while (keep < scored.size() && (keep == 0 || used + scored[keep].token_count <= budget_tokens)) {
    used += scored[keep].token_count;
    ++keep;
  }
  scored.resize(keep);
  for (std::size_t r = 0; r < scored.size(); ++r) scored[r].rank_index = r;
  return scored;
}

std::vector<ScoredDocument> coarse_compress(const StructuredPrompt& prompt,
                                            std::size_t budget_tokens, const Scorer& scorer) {
  if (budget_tokens == 0) throw std::invalid_argument("coarse budget must be positive");
  const std::vector<double> r = document_importances(prompt, scorer);
  std::vector<ScoredDocument> scored;
  scored.reserve(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) {
    scored.push_back({k, r[k], 0, prompt.documents[k].size()});
  }
  return select_documents(std::move(scored), budget_tokens);
}

}  // namespace squeeze
