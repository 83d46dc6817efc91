#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "squeeze/scorer.hpp"

namespace squeeze {

inline constexpr std::string_view kUnknownToken = "<unk>";

/// Deterministic builtin scorer.
///
/// The same estimator is evaluated twice: once on counts from the training
/// corpus and once on counts from the query's own history (context plus
/// the continuation scored so far), and the two are mixed:
///
///   est(w | u)  = 0.7 * (c(u,w) + 1) / (c(u,*) + V) + 0.3 * (c(w) + 1) / (n + V)
///   p(w | h)    = (1 - cache) * est_corpus(w | last(h)) + cache * est_history(w | last(h))
///
/// With an empty history p(w) is the add-one corpus unigram. The
/// vocabulary is the corpus types plus "<unk>", onto which unseen tokens
/// map, so every conditional distribution sums to one over it.
class BigramScorer final : public Scorer {
 public:
  static constexpr double kBigramWeight = 0.7;
  static constexpr double kUnigramWeight = 0.3;
  static constexpr double kDefaultCacheWeight = 0.5;

  /// Bigrams are counted within each training sequence only.
  explicit BigramScorer(const std::vector<std::vector<std::string>>& corpus,
                        double cache_weight = kDefaultCacheWeight);

  /// Tokenizes each text with `scheme` and trains on the result.
  static BigramScorer from_texts(const std::vector<std::string>& texts,
                                 std::string_view scheme = kBuiltinScheme,
                                 double cache_weight = kDefaultCacheWeight);

  LogProbResult score(const LogProbQuery& query) const override;
  std::string model_id() const override { return "builtin-bigram"; }

  /// Vocabulary in id order; index 0 is "<unk>".
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  double cache_weight() const { return cache_weight_; }
  std::size_t corpus_tokens() const { return total_; }

 private:
  using Id = std::uint32_t;

  static std::uint64_t key(Id u, Id w) { return (std::uint64_t{u} << 32) | w; }
  Id lookup(const std::string& token) const;

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, Id> ids_;
  std::vector<std::uint64_t> unigram_;
  std::vector<std::uint64_t> successors_;  // c(u,*)
  std::unordered_map<std::uint64_t, std::uint64_t> bigram_;
  std::uint64_t total_ = 0;
  double cache_weight_;
};

}  // namespace squeeze
