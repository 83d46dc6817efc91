#include "squeeze/scorer.hpp"

#include <cmath>

#include "squeeze/parallel.hpp"

namespace squeeze {

LogProbQuery LogProbQuery::of(const TokenSequence& context, const TokenSequence& continuation) {
  return {context.tokens(), continuation.tokens()};
}

std::vector<BatchItem> Scorer::score_batch(std::span<const LogProbQuery> queries) const {
  std::vector<BatchItem> out(queries.size());
  parallel_for(queries.size(), max_concurrency(), [&](std::size_t i) {
    try {
      out[i].result = score_fitted(*this, queries[i]);
    } catch (const ScorerError& e) {
      out[i].error = e.what();
      out[i].retryable = e.retryable();
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  });
  return out;
}

LogProbQuery fit_context(LogProbQuery query, std::size_t max_tokens) {
  if (max_tokens == 0) return query;
  if (query.continuation.size() > max_tokens) {
    throw ContextLengthError("continuation of " + std::to_string(query.continuation.size()) +
                             " tokens exceeds the scorer limit of " + std::to_string(max_tokens));
  }
  const std::size_t room = max_tokens - query.continuation.size();
  if (query.context.size() > room) {
    query.context.erase(query.context.begin(),
                        query.context.begin() + static_cast<std::ptrdiff_t>(query.context.size() - room));
  }
  return query;
}

void check_result(const LogProbQuery& query, const LogProbResult& result) {
  if (result.logprobs.size() != query.continuation.size()) {
    throw ScorerError("scorer returned " + std::to_string(result.logprobs.size()) +
                          " log-probabilities for " + std::to_string(query.continuation.size()) +
                          " tokens",
                      false);
  }
  for (double lp : result.logprobs) {
    if (!std::isfinite(lp) || lp > 0.0) {
      throw ScorerError("scorer returned an invalid log-probability " + std::to_string(lp), false);
    }
  }
}

LogProbResult score_fitted(const Scorer& scorer, LogProbQuery query) {
  if (query.continuation.empty()) throw std::invalid_argument("continuation must be non-empty");
  query = fit_context(std::move(query), scorer.max_context_tokens());
  LogProbResult result = scorer.score(query);
  check_result(query, result);
  return result;
}

}  // namespace squeeze
