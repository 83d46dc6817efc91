#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "squeeze/pipeline.hpp"
#include "squeeze/prompt.hpp"

namespace squeeze {

/// Shape of a seeded synthetic retrieval instance. Filler, distractors and
/// the question phrase all draw from one fixed word list, so term overlap
/// between the question and unrelated documents is common.
struct SyntheticOptions {
  std::size_t num_docs = 20;
  std::size_t doc_tokens = 140;  // per document, ignored when total_tokens is set
  std::size_t phrase_len = 6;    // question words
  std::size_t vocabulary = 64;   // words of the fixed list in use, at most its size
  /// Exact builtin-scheme token count of instruction + documents + question.
  std::optional<std::size_t> total_tokens = std::nullopt;
  /// 0-based slot of the gold document; drawn from the seed when unset.
  std::optional<std::size_t> gold_position = std::nullopt;
};

/// The fixed filler vocabulary.
const std::vector<std::string>& synthetic_words();

/// Gold document: filler with the contiguous question phrase followed by
/// "is <answer>" planted at a seeded offset. Distractors are filler only.
/// Throws std::invalid_argument when the sizes cannot be met.
PromptRecord make_synthetic(std::uint64_t seed, const SyntheticOptions& options = {});

/// `count` instances with seeds derived from `seed`.
std::vector<PromptRecord> synthetic_dataset(std::uint64_t seed, std::size_t count,
                                            const SyntheticOptions& options = {});

/// Moves document `from` to slot `to`, keeping the relative order of the
/// rest, and updates gold_doc_index.
PromptRecord move_document(PromptRecord record, std::size_t from, std::size_t to);

/// Okapi BM25 of `query` against each document, with document frequencies
/// taken over `docs` themselves.
std::vector<double> bm25_scores(const std::vector<std::string>& query,
                                const std::vector<std::vector<std::string>>& docs,
                                double k1 = 1.2, double b = 0.75);

/// Document indices by score, highest first, ties by index.
std::vector<std::size_t> rank_by(const std::vector<double>& scores);

struct RecallStats {
  std::size_t evaluated = 0;  // rankings with a gold index
  std::size_t skipped = 0;    // rankings without one
  std::vector<std::size_t> ks;
  std::vector<double> recall;  // parallel to ks

  double at(std::size_t k) const;
  nlohmann::json to_json() const;
};

/// Fraction of rankings whose gold document appears in the first k.
RecallStats recall_at(const std::vector<std::vector<std::size_t>>& rankings,
                      const std::vector<std::optional<std::size_t>>& gold,
                      const std::vector<std::size_t>& ks = {1, 5, 10});

/// Optional target LLM for answer accuracy: OpenAI-compatible
/// POST /v1/completions.
struct LlmEndpoint {
  std::string url;
  std::string model = "default";
  int max_tokens = 32;
  double timeout_seconds = 30.0;
};

/// Completion text for `prompt`, or an error message in `error`.
std::optional<std::string> ask_llm(const LlmEndpoint& endpoint, const std::string& prompt,
                                   std::string& error);

/// Case-insensitive substring match against any of the answers.
bool answer_matches(const std::string& response, const std::vector<std::string>& answers);

struct SweepConfig {
  std::vector<std::size_t> positions{1, 5, 10, 15, 20};  // 1-based gold slots
  std::vector<double> ratios{2.0, 4.0};
  std::size_t instances = 100;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  SyntheticOptions synthetic;
  PipelineConfig pipeline;  // target_tokens / ratio are overridden per row
  std::optional<LlmEndpoint> llm;
};

struct SweepRow {
  std::size_t position = 0;
  double ratio = 1.0;
  std::size_t instances = 0;
  double gold_doc_kept = 0.0;     // gold document survived the coarse stage
  double gold_phrase_kept = 0.0;  // planted phrase + answer tokens retained
  double answer_kept = 0.0;       // answer token retained
  double mean_compressed_tokens = 0.0;
  double mean_ratio = 0.0;
  std::optional<double> accuracy;  // with an LLM endpoint only
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  std::string table() const;
};

/// Plants the gold document of each seeded instance at every position and
/// compresses at every ratio with a builtin scorer trained on the instance.
/// Rows are ordered by position, then ratio.
SweepReport run_position_sweep(const SweepConfig& config);

/// Left-aligned text columns separated by two spaces.
std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

}  // namespace squeeze
