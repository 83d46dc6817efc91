#pragma once

// Reference implementations used as test oracles. Each one recomputes its
// answer from raw counts or by exhaustive search and shares no code with
// the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

/// Cached bigram/unigram reference model, recounted from scratch on every
/// call. Slow and obviously correct.
class ReferenceLm {
 public:
  ReferenceLm(std::vector<std::vector<std::string>> corpus, double cache_weight)
      : corpus_(std::move(corpus)), cache_(cache_weight) {
    vocab_.insert("<unk>");
    for (const auto& s : corpus_) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        vocab_.insert(s[i]);
        ++uni_[s[i]];
        ++n_;
        if (i > 0) ++bi_[{s[i - 1], s[i]}];
      }
    }
  }

  std::string norm(const std::string& w) const { return vocab_.count(w) ? w : "<unk>"; }
  const std::set<std::string>& vocabulary() const { return vocab_; }

  /// p(w | history)
  double prob(std::vector<std::string> history, std::string w) const {
    for (auto& h : history) h = norm(h);
    w = norm(w);
    const double v = static_cast<double>(vocab_.size());
    const double cu = count(uni_, w);
    const double unigram = (cu + 1.0) / (static_cast<double>(n_) + v);
    if (history.empty()) return unigram;
    const std::string& u = history.back();

    double succ_u = 0.0;
    for (const auto& [pair, c] : bi_) {
      if (pair.first == u) succ_u += static_cast<double>(c);
    }
    const double corpus_est = 0.7 * (count(bi_, std::make_pair(u, w)) + 1.0) / (succ_u + v) + 0.3 * unigram;

    double h_uw = 0.0, h_u = 0.0, h_w = 0.0;
    for (std::size_t i = 0; i < history.size(); ++i) {
      if (history[i] == w) h_w += 1.0;
      if (i + 1 < history.size() && history[i] == u) {
        h_u += 1.0;
        if (history[i + 1] == w) h_uw += 1.0;
      }
    }
    const double hist_est = 0.7 * (h_uw + 1.0) / (h_u + v) +
                            0.3 * (h_w + 1.0) / (static_cast<double>(history.size()) + v);
    return (1.0 - cache_) * corpus_est + cache_ * hist_est;
  }

  /// log P(seq) by the chain rule.
  double joint_log(const std::vector<std::string>& seq) const {
    double total = 0.0;
    std::vector<std::string> h;
    for (const auto& w : seq) {
      total += std::log(prob(h, w));
      h.push_back(w);
    }
    return total;
  }

  /// Per-token log-probabilities of `continuation` after `context`.
  std::vector<double> logprobs(const std::vector<std::string>& context,
                               const std::vector<std::string>& continuation) const {
    std::vector<double> out;
    std::vector<std::string> h = context;
    for (const auto& w : continuation) {
      out.push_back(std::log(prob(h, w)));
      h.push_back(w);
    }
    return out;
  }

 private:
  template <class M, class K>
  static double count(const M& m, const K& k) {
    auto it = m.find(k);
    return it == m.end() ? 0.0 : static_cast<double>(it->second);
  }

  std::vector<std::vector<std::string>> corpus_;
  double cache_;
  std::set<std::string> vocab_;
  std::map<std::string, std::size_t> uni_;
  std::map<std::pair<std::string, std::string>, std::size_t> bi_;
  std::size_t n_ = 0;
};

inline std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// log p(w | prefix) obtained only from joint probabilities, normalising
/// over every vocabulary item.
inline double bayes_conditional_log(const ReferenceLm& lm, const std::vector<std::string>& prefix,
                                    const std::string& w) {
  double z = 0.0;
  for (const auto& v : lm.vocabulary()) z += std::exp(lm.joint_log(cat(prefix, {v})));
  return lm.joint_log(cat(prefix, {w})) - std::log(z);
}

/// log p(que | x) by Bayes: P(que ++ x) / P(x) with que drawn first.
inline double question_posterior_log(const ReferenceLm& lm, const std::vector<std::string>& que,
                                     const std::vector<std::string>& x) {
  return lm.joint_log(cat(que, x)) - lm.joint_log(x);
}

/// Longest prefix of response[from..] occurring contiguously in `text`,
/// leftmost occurrence. Returns {start, length}; {0, 0} for no match.
inline std::pair<std::size_t, std::size_t> naive_longest_match(
    const std::vector<std::string>& text, const std::vector<std::string>& response,
    std::size_t from) {
  for (std::size_t len = response.size() - from; len > 0; --len) {
    for (std::size_t s = 0; s + len <= text.size(); ++s) {
      if (std::equal(text.begin() + s, text.begin() + s + len, response.begin() + from)) {
        return {s, len};
      }
    }
  }
  return {0, 0};
}

/// Shortest window [b, e) of `hay` containing `needle` as a subsequence,
/// leftmost among the shortest, by trying every window.
inline std::optional<std::pair<std::size_t, std::size_t>> naive_shortest_window(
    const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty()) return std::nullopt;
  for (std::size_t len = needle.size(); len <= hay.size(); ++len) {
    for (std::size_t b = 0; b + len <= hay.size(); ++b) {
      std::size_t k = 0;
      for (std::size_t i = b; i < b + len && k < needle.size(); ++i) {
        if (hay[i] == needle[k]) ++k;
      }
      if (k == needle.size()) return std::make_pair(b, b + len);
    }
  }
  return std::nullopt;
}

/// Average ranks; values within `eps` of each other count as ties.
inline std::vector<double> ranks(const std::vector<double>& v, double eps) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] - v[idx[i]] <= eps) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Spearman correlation (Pearson on average ranks).
inline double spearman(const std::vector<double>& a, const std::vector<double>& b,
                       double eps = 1e-12) {
  const auto ra = ranks(a, eps);
  const auto rb = ranks(b, eps);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

}  // namespace oracle
