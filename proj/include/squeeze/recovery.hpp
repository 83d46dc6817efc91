#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "squeeze/prompt.hpp"
#include "squeeze/tokenize.hpp"

namespace squeeze {

/// Suffix automaton over a sequence of symbol ids. Answers "longest prefix
/// of a pattern that occurs somewhere in the text" in O(pattern) time,
/// reporting the leftmost occurrence.
class SuffixAutomaton {
 public:
  SuffixAutomaton() = default;
  explicit SuffixAutomaton(std::span<const int> text);

  struct Match {
    std::size_t start = 0;
    std::size_t length = 0;
  };
  /// Symbols < 0 never match.
  Match longest_prefix_match(std::span<const int> pattern) const;

  std::size_t state_count() const { return states_.size(); }

 private:
  struct State {
    std::size_t len = 0;
    int link = -1;
    std::size_t first_end = 0;  // end position of the first occurrence
    std::map<int, int> next;
  };
  std::vector<State> states_{State{}};
};

class RecoveryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class WindowStrategy {
  /// Map the matched compressed tokens back through the origin map and emit
  /// the original span from the first to the last of them.
  kProvenance,
  /// Emit the shortest window of the original containing the matched tokens
  /// as a subsequence (leftmost on ties).
  kShortestWindow,
};

struct RecoveryOptions {
  std::size_t min_match = 1;
  WindowStrategy strategy = WindowStrategy::kProvenance;
};

/// Longest run of response tokens starting at `from` found in the
/// compressed prompt, with the leftmost compressed position it occurs at.
struct SubstringMatch {
  std::size_t compressed_start = 0;
  std::size_t length = 0;
};

class RecoveryIndex {
 public:
  /// Index with provenance. Throws RecoveryError when the two prompts were
  /// tokenized with different schemes.
  static RecoveryIndex build(const StructuredPrompt& original, const CompressedPrompt& compressed);

  /// Index without provenance, for compressed prompts produced elsewhere.
  static RecoveryIndex build(const TokenSequence& original, const TokenSequence& compressed);

  SubstringMatch longest_match(std::span<const std::string> response, std::size_t from) const;

  bool has_provenance() const { return has_provenance_; }
  const std::string& scheme() const { return scheme_; }
  const std::vector<std::string>& compressed_tokens() const { return compressed_tokens_; }
  const std::vector<std::string>& original_tokens() const { return original_tokens_; }

  /// Original tokens (each with the gap that preceded it) that replace the
  /// compressed run [start, start + length) matched by `matched`.
  struct Piece {
    std::string gap;
    std::string token;
  };
  std::optional<std::vector<Piece>> resolve(SubstringMatch match,
                                            std::span<const std::string> matched,
                                            WindowStrategy strategy) const;

 private:
  std::vector<std::string> original_tokens_;
  std::vector<std::string> original_gaps_;
  std::vector<std::size_t> original_section_;
  std::vector<std::string> compressed_tokens_;
  std::vector<std::size_t> compressed_origin_;  // flat original position
  bool has_provenance_ = false;
  std::string scheme_;
  std::unordered_map<std::string, int> symbol_;
  SuffixAutomaton automaton_;

  void index_compressed();
};

/// Shortest window [begin, end) of `haystack` containing `needle` as a
/// subsequence, leftmost on ties.
std::optional<Span> shortest_window(std::span<const std::string> haystack,
                                    std::span<const std::string> needle);

using MatchFn = std::function<SubstringMatch(std::span<const std::string>, std::size_t)>;

/// Scans the response left to right. Where a run of response tokens occurs
/// in the compressed prompt, the run is replaced by its original window;
/// everything else passes through unchanged.
TokenSequence recover(const TokenSequence& response, const RecoveryIndex& index,
                      const RecoveryOptions& options = {});

/// recover() with a caller-supplied substring matcher.
TokenSequence recover_with(const TokenSequence& response, const RecoveryIndex& index,
                           const MatchFn& match, const RecoveryOptions& options = {});

}  // namespace squeeze
