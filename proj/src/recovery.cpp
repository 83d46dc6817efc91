#include "squeeze/recovery.hpp"

#include <algorithm>
#include <limits>

namespace squeeze {

SuffixAutomaton::SuffixAutomaton(std::span<const int> text) {
  states_.reserve(2 * text.size() + 1);
  int last = 0;
  for (std::size_t pos = 0; pos < text.size(); ++pos) {
    const int c = text[pos];
    const int cur = static_cast<int>(states_.size());
    states_.push_back({states_[last].len + 1, -1, pos, {}});
    int p = last;
    while (p != -1 && !states_[p].next.contains(c)) {
      states_[p].next[c] = cur;
      p = states_[p].link;
    }
    if (p == -1) {
      states_[cur].link = 0;
    } else {
      const int q = states_[p].next[c];
      if (states_[p].len + 1 == states_[q].len) {
        states_[cur].link = q;
      } else {
        const int clone = static_cast<int>(states_.size());
        State copy = states_[q];
        copy.len = states_[p].len + 1;
        states_.push_back(std::move(copy));
        while (p != -1) {
          auto it = states_[p].next.find(c);
          if (it == states_[p].next.end() || it->second != q) break;
          it->second = clone;
          p = states_[p].link;
        }
        states_[q].link = clone;
        states_[cur].link = clone;
      }
    }
    last = cur;
  }
}

SuffixAutomaton::Match SuffixAutomaton::longest_prefix_match(std::span<const int> pattern) const {
  int state = 0;
  std::size_t len = 0;
  for (int c : pattern) {
    if (c < 0) break;
    auto it = states_[state].next.find(c);
    if (it == states_[state].next.end()) break;
    state = it->second;
    ++len;
  }
  if (len == 0) return {};
  return {states_[state].first_end + 1 - len, len};
}

void RecoveryIndex::index_compressed() {
  std::vector<int> ids;
  ids.reserve(compressed_tokens_.size());
  for (const auto& t : compressed_tokens_) {
    auto [it, inserted] = symbol_.try_emplace(t, static_cast<int>(symbol_.size()));
    ids.push_back(it->second);
  }
  automaton_ = SuffixAutomaton(ids);
}

RecoveryIndex RecoveryIndex::build(const StructuredPrompt& original,
                                   const CompressedPrompt& compressed) {
  if (original.scheme() != compressed.scheme()) {
    throw RecoveryError("original prompt uses scheme '" + original.scheme() +
                        "' but the compressed prompt uses '" + compressed.scheme() + "'");
  }
  RecoveryIndex index;
  index.has_provenance_ = true;
  index.scheme_ = original.scheme();

  std::vector<const TokenSequence*> sections{&original.instruction};
  for (const auto& d : original.documents) sections.push_back(&d);
  sections.push_back(&original.question);
  std::unordered_map<std::string, std::size_t> base;
  for (std::size_t s = 0; s < sections.size(); ++s) {
    const TokenSequence& seq = *sections[s];
    base[seq.source_id()] = index.original_tokens_.size();
    for (std::size_t i = 0; i < seq.size(); ++i) {
      index.original_tokens_.push_back(seq[i]);
      index.original_gaps_.emplace_back(seq.gap_before(i));
      index.original_section_.push_back(s);
    }
  }

  index.compressed_tokens_ = compressed.tokens().tokens();
  for (const TokenOrigin& o : compressed.origin_map()) {
    auto it = base.find(o.source_id);
    if (it == base.end() || o.index >= original.section(o.source_id).size()) {
      throw RecoveryError("origin map refers to '" + o.source_id + "':" +
                          std::to_string(o.index) + " outside the original prompt");
    }
    index.compressed_origin_.push_back(it->second + o.index);
  }
  index.index_compressed();
  return index;
}

RecoveryIndex RecoveryIndex::build(const TokenSequence& original, const TokenSequence& compressed) {
  if (original.scheme() != compressed.scheme()) {
    throw RecoveryError("original text uses scheme '" + original.scheme() +
                        "' but the compressed text uses '" + compressed.scheme() + "'");
  }
  RecoveryIndex index;
  index.scheme_ = original.scheme();
  for (std::size_t i = 0; i < original.size(); ++i) {
    index.original_tokens_.push_back(original[i]);
    index.original_gaps_.emplace_back(original.gap_before(i));
    index.original_section_.push_back(0);
  }
  index.compressed_tokens_ = compressed.tokens();
  index.index_compressed();
  return index;
}

SubstringMatch RecoveryIndex::longest_match(std::span<const std::string> response,
                                            std::size_t from) const {
  std::vector<int> pattern;
  for (std::size_t i = from; i < response.size(); ++i) {
    auto it = symbol_.find(response[i]);
    if (it == symbol_.end()) break;
    pattern.push_back(it->second);
  }
  const auto m = automaton_.longest_prefix_match(pattern);
  return {m.start, m.length};
}

std::optional<Span> shortest_window(std::span<const std::string> haystack,
                                    std::span<const std::string> needle) {
  if (needle.empty()) return std::nullopt;
  std::optional<Span> best;
  std::size_t i = 0;
  while (i < haystack.size()) {
    if (haystack[i] != needle[0]) {
      ++i;
      continue;
    }
    // Forward: earliest end of a match starting at i.
    std::size_t j = i;
    std::size_t k = 0;
    while (j < haystack.size() && k < needle.size()) {
      if (haystack[j] == needle[k]) ++k;
      ++j;
    }
    if (k < needle.size()) break;
    const std::size_t end = j;  // exclusive
    // Backward: latest start that still matches up to `end`.
    std::size_t b = end;
    std::size_t r = needle.size();
    while (r > 0) {
      --b;
      if (haystack[b] == needle[r - 1]) --r;
    }
    if (!best || end - b < best->end - best->begin) best = Span{b, end};
    i = b + 1;
  }
  return best;
}

std::optional<std::vector<RecoveryIndex::Piece>> RecoveryIndex::resolve(
    SubstringMatch match, std::span<const std::string> matched, WindowStrategy strategy) const {
  std::vector<Piece> pieces;
  const auto emit_window = [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      pieces.push_back({p == begin ? std::string(" ") : original_gaps_[p], original_tokens_[p]});
    }
  };
  if (strategy == WindowStrategy::kProvenance && has_provenance_) {
    std::size_t k = match.compressed_start;
    const std::size_t stop = match.compressed_start + match.length;
    while (k < stop) {
      const std::size_t section = original_section_[compressed_origin_[k]];
      std::size_t lo = compressed_origin_[k];
      std::size_t hi = lo;
      while (k < stop && original_section_[compressed_origin_[k]] == section) {
        lo = std::min(lo, compressed_origin_[k]);
        hi = std::max(hi, compressed_origin_[k]);
        ++k;
      }
      emit_window(lo, hi + 1);
    }
    return pieces;
  }
  auto window = shortest_window(original_tokens_, matched);
  if (!window) return std::nullopt;
  emit_window(window->begin, window->end);
  return pieces;
}

TokenSequence recover(const TokenSequence& response, const RecoveryIndex& index,
                      const RecoveryOptions& options) {
  return recover_with(
      response, index,
      [&index](std::span<const std::string> tokens, std::size_t from) {
        return index.longest_match(tokens, from);
      },
      options);
}

TokenSequence recover_with(const TokenSequence& response, const RecoveryIndex& index,
                           const MatchFn& match, const RecoveryOptions& options) {
  const auto& y = response.tokens();
  std::string text;
  std::vector<Span> spans;
  const auto append = [&](std::string_view gap, const std::string& token) {
    text.append(gap);
    spans.push_back({text.size(), text.size() + token.size()});
    text.append(token);
  };

  std::size_t l = 0;
  while (l < y.size()) {
    const SubstringMatch m = match(y, l);
    if (m.length > 0 && m.length >= std::max<std::size_t>(options.min_match, 1)) {
      auto pieces = index.resolve(m, std::span<const std::string>(y).subspan(l, m.length),
                                  options.strategy);
      if (pieces && !pieces->empty()) {
        for (std::size_t n = 0; n < pieces->size(); ++n) {
          const auto& piece = (*pieces)[n];
          append(n == 0 ? response.gap_before(l) : std::string_view(piece.gap), piece.token);
        }
      } else {
        for (std::size_t i = l; i < l + m.length; ++i) append(response.gap_before(i), y[i]);
      }
      l += m.length;
    } else {
      append(response.gap_before(l), y[l]);
      ++l;
    }
  }
  text.append(response.trailing());
  return TokenSequence(std::move(text), std::move(spans), "recovered", response.scheme());
}

}  // namespace squeeze
