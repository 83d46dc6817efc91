#include "squeeze/http_scorer.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

namespace squeeze {

using nlohmann::json;

HttpScorerConfig HttpScorerConfig::from_json(const json& j) {
  HttpScorerConfig c;
  c.base_url = j.at("url").get<std::string>();
  c.model = j.value("model", std::string("default"));
  const std::string profile = j.value("profile", std::string("logprobs"));
  if (profile == "logprobs") {
    c.profile = HttpProfile::kLogprobs;
  } else if (profile == "openai") {
    c.profile = HttpProfile::kOpenAICompletions;
  } else {
    throw std::invalid_argument("unknown http scorer profile '" + profile + "'");
  }
  c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
  c.max_context_tokens = j.value("max_context_tokens", c.max_context_tokens);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  if (c.max_concurrency == 0) throw std::invalid_argument("max_concurrency must be positive");
  return c;
}

HttpScorer::HttpScorer(HttpScorerConfig config) : config_(std::move(config)) {
  if (config_.api_key.empty()) {
    if (const char* key = std::getenv(kApiKeyEnv)) config_.api_key = key;
  }
}

json HttpScorer::post(const std::string& path, const json& body) const {
  httplib::Client client(config_.base_url);
  const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    throw ScorerError("request to " + config_.base_url + path + " failed: " +
                          httplib::to_string(res.error()),
                      true);
  }
  if (res->status == 413) throw ContextLengthError("scorer rejected the query as too long");
  if (res->status >= 500) {
    throw ScorerError("scorer returned HTTP " + std::to_string(res->status), true);
  }
  if (res->status != 200) {
    throw ScorerError("scorer returned HTTP " + std::to_string(res->status) + ": " + res->body,
                      false);
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw ScorerError(std::string("malformed scorer response: ") + e.what(), false);
  }
}

CompletionPrompt build_completion_prompt(const LogProbQuery& query) {
  CompletionPrompt p;
  const auto append = [&p](const std::string& tok) {
    if (!p.text.empty()) p.text.push_back(' ');
    const std::size_t begin = p.text.size();
    p.text.append(tok);
    return Span{begin, p.text.size()};
  };
  for (const auto& t : query.context) append(t);
  for (const auto& t : query.continuation) p.continuation_spans.push_back(append(t));
  return p;
}

std::vector<double> align_echo_logprobs(const CompletionPrompt& prompt, const json& logprobs) {
  const json& values = logprobs.at("token_logprobs");
  const json& offsets = logprobs.at("text_offset");
  if (values.size() != offsets.size()) {
    throw ScorerError("echoed token_logprobs and text_offset differ in length", false);
  }
  const auto& spans = prompt.continuation_spans;
  std::vector<double> out(spans.size(), 0.0);
  if (spans.empty()) return out;
  // The separator before the first continuation token already belongs to it.
  const std::size_t start = spans.front().begin > 0 ? spans.front().begin - 1 : 0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const auto off = offsets[i].get<std::size_t>();
    if (off >= prompt.text.size()) break;  // generated tokens
    if (off < start) continue;
    while (k + 1 < spans.size() && off >= spans[k].end) ++k;
    if (!values[i].is_null()) out[k] += values[i].get<double>();
  }
  return out;
}

LogProbResult HttpScorer::score_once(const LogProbQuery& query) const {
  LogProbResult result;
  try {
    if (config_.profile == HttpProfile::kLogprobs) {
      json body = {{"model", config_.model},
                   {"context", query.context},
                   {"continuation", query.continuation}};
      json resp = post("/v1/logprobs", body);
      result.logprobs = resp.at("logprobs").get<std::vector<double>>();
      result.model_id = resp.value("model", config_.model);
    } else {
      const CompletionPrompt prompt = build_completion_prompt(query);
      json body = {{"model", config_.model}, {"prompt", prompt.text}, {"max_tokens", 1},
                   {"echo", true},           {"logprobs", 0},          {"temperature", 0}};
      json resp = post("/v1/completions", body);
      result.logprobs = align_echo_logprobs(prompt, resp.at("choices").at(0).at("logprobs"));
      result.model_id = resp.value("model", config_.model);
    }
  } catch (const json::exception& e) {
    throw ScorerError(std::string("malformed scorer response: ") + e.what(), false);
  }
  // Servers round; treat tiny positive values as zero.
  for (double& lp : result.logprobs) {
    if (lp > 0.0 && lp < 1e-6) lp = 0.0;
  }
  check_result(query, result);
  return result;
}

LogProbResult HttpScorer::score(const LogProbQuery& query) const {
  if (query.continuation.empty()) throw std::invalid_argument("continuation must be non-empty");
  for (int attempt = 0;; ++attempt) {
    try {
      return score_once(query);
    } catch (const ScorerError& e) {
      if (!e.retryable() || attempt >= config_.max_retries) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(50 << attempt));
    }
  }
}

}  // namespace squeeze
