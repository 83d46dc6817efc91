#pragma once

#include <cstddef>
#include <vector>

#include "squeeze/prompt.hpp"
#include "squeeze/scorer.hpp"

namespace squeeze {

struct ScoredDocument {
  std::size_t doc_index = 0;
  double importance = 0.0;     // mean log-likelihood of question + restrict given the document
  std::size_t rank_index = 0;  // 0 = most important
  std::size_t token_count = 0;

  friend bool operator==(const ScoredDocument&, const ScoredDocument&) = default;
};

/// Mean log-probability of (question ++ restrict) with the document as
/// context. Higher means the document explains the question better.
/// Throws std::invalid_argument for an empty question.
double importance(const TokenSequence& doc, const TokenSequence& question,
                  const TokenSequence& restrict, const Scorer& scorer);

/// importance() of every document, scored through one batch call.
std::vector<double> document_importances(const StructuredPrompt& prompt, const Scorer& scorer);

/// Sorts by importance (descending, ties by doc_index) and keeps the
/// longest prefix whose total token count fits `budget_tokens`, but always
/// at least one document. Ranks are assigned in that order.
std::vector<ScoredDocument> select_documents(std::vector<ScoredDocument> scored,
                                             std::size_t budget_tokens);

/// document_importances() followed by select_documents().
std::vector<ScoredDocument> coarse_compress(const StructuredPrompt& prompt,
                                            std::size_t budget_tokens, const Scorer& scorer);

/// Stable order: importance descending, then doc_index ascending.
std::vector<ScoredDocument> reorder(std::vector<ScoredDocument> scored);

}  // namespace squeeze
