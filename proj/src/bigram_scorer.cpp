#include "squeeze/bigram_scorer.hpp"

#include <cmath>
#include <stdexcept>

namespace squeeze {

BigramScorer::BigramScorer(const std::vector<std::vector<std::string>>& corpus,
                           double cache_weight)
    : cache_weight_(cache_weight) {
  if (!(cache_weight >= 0.0 && cache_weight <= 1.0)) {
    throw std::invalid_argument("cache weight must lie in [0, 1]");
  }
  vocab_.emplace_back(kUnknownToken);
  ids_.emplace(std::string(kUnknownToken), 0);
  unigram_.push_back(0);
  successors_.push_back(0);
  for (const auto& sentence : corpus) {
    Id prev = 0;
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      auto [it, inserted] = ids_.try_emplace(sentence[i], static_cast<Id>(vocab_.size()));
      if (inserted) {
        vocab_.push_back(sentence[i]);
        unigram_.push_back(0);
        successors_.push_back(0);
      }
      const Id id = it->second;
      ++unigram_[id];
      ++total_;
      if (i > 0) {
        ++bigram_[key(prev, id)];
        ++successors_[prev];
      }
      prev = id;
    }
  }
}

BigramScorer BigramScorer::from_texts(const std::vector<std::string>& texts,
                                      std::string_view scheme, double cache_weight) {
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(texts.size());
  for (const auto& t : texts) corpus.push_back(tokenize(t, scheme).tokens());
  return BigramScorer(corpus, cache_weight);
}

BigramScorer::Id BigramScorer::lookup(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? 0 : it->second;
}

LogProbResult BigramScorer::score(const LogProbQuery& query) const {
  if (query.continuation.empty()) throw std::invalid_argument("continuation must be non-empty");

  std::vector<Id> seq;
  seq.reserve(query.context.size() + query.continuation.size());
  for (const auto& t : query.context) seq.push_back(lookup(t));
  for (const auto& t : query.continuation) seq.push_back(lookup(t));

  const double v = static_cast<double>(vocab_.size());
  const double corpus_n = static_cast<double>(total_);

  // History counts, updated as the sequence is consumed.
  std::unordered_map<Id, std::uint64_t> h_unigram;
  std::unordered_map<Id, std::uint64_t> h_successors;
  std::unordered_map<std::uint64_t, std::uint64_t> h_bigram;
  const auto count = [](const auto& map, auto k) -> double {
    auto it = map.find(k);
    return it == map.end() ? 0.0 : static_cast<double>(it->second);
  };

  LogProbResult result;
  result.model_id = model_id();
  result.logprobs.reserve(query.continuation.size());
  const std::size_t first_scored = query.context.size();

  for (std::size_t t = 0; t < seq.size(); ++t) {
    const Id w = seq[t];
    if (t >= first_scored) {
      const double uni = (static_cast<double>(unigram_[w]) + 1.0) / (corpus_n + v);
      double p = uni;
      if (t > 0) {
        const Id u = seq[t - 1];
        auto bi_it = bigram_.find(key(u, w));
        const double c_uw = bi_it == bigram_.end() ? 0.0 : static_cast<double>(bi_it->second);
        const double corpus_est =
            kBigramWeight * (c_uw + 1.0) / (static_cast<double>(successors_[u]) + v) +
            kUnigramWeight * uni;
        const double history_est =
            kBigramWeight * (count(h_bigram, key(u, w)) + 1.0) / (count(h_successors, u) + v) +
            kUnigramWeight * (count(h_unigram, w) + 1.0) / (static_cast<double>(t) + v);
        p = (1.0 - cache_weight_) * corpus_est + cache_weight_ * history_est;
      }
      result.logprobs.push_back(std::log(p));
    }
    ++h_unigram[w];
    if (t > 0) {
      ++h_bigram[key(seq[t - 1], w)];
      ++h_successors[seq[t - 1]];
    }
  }
  return result;
}

}  // namespace squeeze
