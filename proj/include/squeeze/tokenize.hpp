#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace squeeze {

inline constexpr std::string_view kBuiltinScheme = "builtin";
inline constexpr std::string_view kCharScheme = "char";

/// Half-open byte range [begin, end) into a source text.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

class UnknownSchemeError : public std::runtime_error {
 public:
  explicit UnknownSchemeError(const std::string& id)
      : std::runtime_error("unknown tokenization scheme '" + id + "'") {}
};

/// A tokenized view of one source text.
///
/// The sequence owns its source text, so the bytes between tokens (the
/// "gaps") can be reproduced exactly. Offsets are strictly ordered and
/// non-overlapping; every token is non-empty. Immutable once built.
class TokenSequence {
 public:
  TokenSequence() = default;

  /// Throws std::invalid_argument when the offsets are out of range,
  /// empty, overlapping or not increasing.
  TokenSequence(std::string text, std::vector<Span> offsets,
                std::string source_id = {},
                std::string scheme = std::string(kBuiltinScheme));

  const std::string& text() const { return text_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<Span>& offsets() const { return offsets_; }
  const std::string& source_id() const { return source_id_; }
  const std::string& scheme() const { return scheme_; }

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  const std::string& operator[](std::size_t i) const { return tokens_[i]; }

  /// Source bytes between the previous token (or the start) and token i.
  std::string_view gap_before(std::size_t i) const;
  /// Source bytes after the last token.
  std::string_view trailing() const;

  TokenSequence with_source_id(std::string source_id) const;

 private:
  std::string text_;
  std::vector<Span> offsets_;
  std::vector<std::string> tokens_;
  std::string source_id_;
  std::string scheme_ = std::string(kBuiltinScheme);
};

/// Rebuilds the source text from the tokens and the recorded gaps.
std::string detokenize(const TokenSequence& seq);

/// Joins the token strings of several sequences into one flat list.
std::vector<std::string> concat_tokens(const std::vector<const TokenSequence*>& parts);

class TokenizerScheme {
 public:
  virtual ~TokenizerScheme() = default;
  virtual std::string id() const = 0;
  /// Splits text into non-overlapping, increasing, non-empty byte spans.
  virtual std::vector<Span> split(std::string_view text) const = 0;
};

/// Unicode whitespace split with ASCII punctuation detached.
class WhitespacePunctScheme final : public TokenizerScheme {
 public:
  std::string id() const override { return std::string(kBuiltinScheme); }
  std::vector<Span> split(std::string_view text) const override;
};

/// One token per non-whitespace code point.
class CharScheme final : public TokenizerScheme {
 public:
  std::string id() const override { return std::string(kCharScheme); }
  std::vector<Span> split(std::string_view text) const override;
};

/// Greedy longest-match over an externally supplied subword vocabulary,
/// applied inside each chunk produced by the builtin scheme. Characters no
/// vocabulary entry covers fall back to single code points.
class VocabScheme final : public TokenizerScheme {
 public:
  VocabScheme(std::string id, std::vector<std::string> vocabulary);

  /// One vocabulary entry per line; blank lines are ignored.
  static std::shared_ptr<VocabScheme> from_file(std::string id, const std::string& path);

  std::string id() const override { return id_; }
  std::vector<Span> split(std::string_view text) const override;

 private:
  std::string id_;
  std::vector<std::string> vocabulary_;  // sorted, unique
  std::size_t max_len_ = 0;
};

/// Process-wide registry. The builtin and char schemes are always present;
/// ids of the form "vocab:<path>" load a VocabScheme from <path> on first use.
class SchemeRegistry {
 public:
  static SchemeRegistry& global();

  void add(std::shared_ptr<const TokenizerScheme> scheme);
  std::shared_ptr<const TokenizerScheme> find(std::string_view id) const;
  bool contains(std::string_view id) const;

 private:
  SchemeRegistry();
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

TokenSequence tokenize(std::string text, std::string_view scheme = kBuiltinScheme,
                       std::string source_id = {});

/// Byte length of the UTF-8 sequence starting at text[pos]; invalid lead
/// bytes count as one.
std::size_t utf8_length(std::string_view text, std::size_t pos);

/// Length of the Unicode whitespace character at text[pos], or 0.
std::size_t whitespace_length(std::string_view text, std::size_t pos);

}  // namespace squeeze
