#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "squeeze/tokenize.hpp"

namespace squeeze {

/// Tokens of `continuation` are scored one by one, each conditioned on
/// `context` followed by the preceding continuation tokens.
struct LogProbQuery {
  std::vector<std::string> context;
  std::vector<std::string> continuation;

  static LogProbQuery of(const TokenSequence& context, const TokenSequence& continuation);
};

struct LogProbResult {
  std::vector<double> logprobs;  // natural log, one per continuation token
  std::string model_id;
};

class ScorerError : public std::runtime_error {
 public:
  ScorerError(const std::string& what, bool retryable)
      : std::runtime_error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

/// The query does not fit the backend; callers truncate the context from
/// the left and retry.
class ContextLengthError : public ScorerError {
 public:
  explicit ContextLengthError(const std::string& what) : ScorerError(what, false) {}
};

struct BatchItem {
  std::optional<LogProbResult> result;
  std::string error;
  bool retryable = false;

  bool ok() const { return result.has_value(); }
};

/// Stand-in for the small language model: returns per-token
/// log-probabilities of a continuation given a context. Implementations
/// must be thread-safe.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual LogProbResult score(const LogProbQuery& query) const = 0;
  virtual std::string model_id() const = 0;

  /// Largest context + continuation length the backend accepts; 0 when
  /// unbounded.
  virtual std::size_t max_context_tokens() const { return 0; }
  virtual std::size_t max_concurrency() const { return 1; }

  /// Element-wise score(); failures are reported per query and the output
  /// order equals the input order.
  virtual std::vector<BatchItem> score_batch(std::span<const LogProbQuery> queries) const;
};

/// Drops context tokens from the left until the query fits `max_tokens`
/// (0 = no limit). Throws ContextLengthError when the continuation alone
/// is too long.
LogProbQuery fit_context(LogProbQuery query, std::size_t max_tokens);

/// score() after fit_context() with the scorer's own limit; the result is
/// checked for shape and range.
LogProbResult score_fitted(const Scorer& scorer, LogProbQuery query);

/// Throws ScorerError unless the result has one finite, non-positive value
/// per continuation token.
void check_result(const LogProbQuery& query, const LogProbResult& result);

}  // namespace squeeze
