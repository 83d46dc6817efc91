#pragma once

#include <string>

#include <json.hpp>

#include "squeeze/scorer.hpp"

namespace squeeze {

inline constexpr const char* kApiKeyEnv = "SQUEEZE_API_KEY";

enum class HttpProfile {
  /// POST /v1/logprobs {"model", "context": [str], "continuation": [str]}
  ///   -> {"logprobs": [float], "model": str}
  kLogprobs,
  /// OpenAI-compatible POST /v1/completions with echo=true; server tokens
  /// are aligned back onto our tokens through their character offsets.
  kOpenAICompletions,
};

struct HttpScorerConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8080"
  std::string model;
  HttpProfile profile = HttpProfile::kLogprobs;
  std::size_t max_concurrency = 4;
  std::size_t max_context_tokens = 0;
  int max_retries = 2;
  double timeout_seconds = 30.0;
  std::string api_key;  // falls back to $SQUEEZE_API_KEY when empty

  /// Reads {"url", "model", "profile": "logprobs"|"openai", "max_concurrency",
  /// "max_context_tokens", "max_retries", "timeout_seconds"}.
  static HttpScorerConfig from_json(const nlohmann::json& j);
};

class HttpScorer final : public Scorer {
 public:
  explicit HttpScorer(HttpScorerConfig config);

  LogProbResult score(const LogProbQuery& query) const override;
  std::string model_id() const override { return config_.model; }
  std::size_t max_context_tokens() const override { return config_.max_context_tokens; }
  std::size_t max_concurrency() const override { return config_.max_concurrency; }

  const HttpScorerConfig& config() const { return config_; }

 private:
  LogProbResult score_once(const LogProbQuery& query) const;
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  HttpScorerConfig config_;
};

/// Builds the /v1/completions prompt text for a query (tokens joined by
/// single spaces) and returns, per continuation token, its character span.
struct CompletionPrompt {
  std::string text;
  std::vector<Span> continuation_spans;
};
CompletionPrompt build_completion_prompt(const LogProbQuery& query);

/// Sums echoed server log-probabilities onto our continuation tokens. A
/// server token belongs to the continuation token whose span contains its
/// start offset, or to the next continuation token when it starts in the
/// gap before it. Null log-probabilities count as zero.
std::vector<double> align_echo_logprobs(const CompletionPrompt& prompt,
                                        const nlohmann::json& logprobs);

}  // namespace squeeze
