#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "squeeze/budget.hpp"
#include "squeeze/fine.hpp"
#include "squeeze/prompt.hpp"
#include "squeeze/scorer.hpp"

namespace squeeze {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScorerSettings {
  std::string kind = "builtin";  // "builtin" | "http"
  std::optional<std::string> corpus_path;
  double cache_weight = 0.5;
  nlohmann::json http = nlohmann::json::object();
};

/// Prices per 1,000 tokens, in whatever currency the caller uses.
struct Prices {
  double input_per_1k = 0.0;
  double output_per_1k = 0.0;
};

struct PipelineConfig {
  std::optional<std::size_t> target_tokens;
  std::optional<double> ratio;
  double tau_ins = kDefaultTauIns;
  double tau_que = kDefaultTauQue;
  double delta_tau = kDefaultDeltaTau;
  double granular_k = 2.0;
  std::size_t segment_size = kDefaultSegmentSize;
  bool reorder = true;
  std::string restrict_text = std::string(kDefaultRestrict);
  std::string scheme = std::string(kBuiltinScheme);
  QuestionPosition question_position = QuestionPosition::kBeforePrefix;
  ScorerSettings scorer;
  std::optional<Prices> prices;

  /// Unknown keys are rejected so typos do not silently fall back to
  /// defaults. Throws ConfigError.
  static PipelineConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Throws ConfigError on out-of-range values or when both or neither of
  /// target_tokens and ratio are set.
  void validate() const;

  /// Target token count for a prompt of `original_tokens` tokens.
  std::size_t resolve_target(std::size_t original_tokens) const;
};

struct DocReport {
  std::size_t doc_index = 0;
  std::size_t token_count = 0;
  std::optional<double> importance;
  std::optional<std::size_t> rank_index;  // empty when dropped by the coarse stage
  double tau = 0.0;
  std::size_t retained_tokens = 0;
};

struct CompressionReport {
  std::size_t original_tokens = 0;
  std::size_t compressed_tokens = 0;
  std::size_t target_tokens = 0;
  double ratio = 1.0;  // original / compressed
  double tau_doc = 1.0;
  std::vector<DocReport> per_doc;
  double elapsed_ms = 0.0;
  std::optional<double> estimated_cost_savings;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

struct CompressionOutput {
  CompressedPrompt compressed;
  CompressionReport report;
};

/// Coarse document selection, optional reordering, budget planning, then
/// question-aware token pruning of each kept document and plain pruning of
/// the instruction and question. Output sections: instruction, documents,
/// question. A target at or above the prompt size returns it unchanged.
///
/// Throws InfeasibleBudgetError, InvalidPromptError (empty question),
/// ConfigError and ScorerError.
CompressionOutput compress(const StructuredPrompt& prompt, const PipelineConfig& config,
                           const Scorer& scorer, std::size_t jobs = 1);

/// Builtin scorer trained on `corpus_path` (one training text per line) or,
/// without one, on `fallback_corpus`; or an HTTP scorer.
std::unique_ptr<Scorer> make_scorer(const ScorerSettings& settings, std::string_view scheme,
                                    const std::vector<std::string>& fallback_corpus);

/// Every text of the records, for training the builtin scorer.
std::vector<std::string> corpus_texts(const std::vector<PromptRecord>& records);

}  // namespace squeeze
