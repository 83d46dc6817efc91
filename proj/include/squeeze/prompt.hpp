#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "squeeze/tokenize.hpp"

namespace squeeze {

inline constexpr std::string_view kDefaultRestrict =
    "We can get the answer to this question in the given documents.";

inline constexpr std::string_view kInstructionId = "ins";
inline constexpr std::string_view kQuestionId = "que";
inline constexpr std::string_view kRestrictId = "restrict";

std::string doc_source_id(std::size_t k);
/// Parses "doc:<k>"; std::nullopt for any other id.
std::optional<std::size_t> parse_doc_source_id(std::string_view id);

class InvalidPromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One line of the prompt JSONL input.
struct PromptRecord {
  std::string instruction;
  std::vector<std::string> documents;
  std::string question;
  std::vector<std::string> answers;
  std::optional<std::size_t> gold_doc_index;
};

/// Accepts the native schema and the 20-document NaturalQuestions layout
/// ({"question", "answers", "ctxs": [{"title", "text", "isgold"|"hasanswer"}]}).
/// Throws InvalidPromptError on schema violations.
PromptRecord parse_prompt_record(const nlohmann::json& j);
nlohmann::json to_json(const PromptRecord& r);

/// Instruction, ordered documents, question and the restrictive statement
/// used only while scoring. Section ids are "ins", "doc:<k>", "que" and
/// "restrict".
struct StructuredPrompt {
  TokenSequence instruction;
  std::vector<TokenSequence> documents;
  TokenSequence question;
  TokenSequence restrict;

  /// Tokenizes every section with one scheme. Documents that tokenize to
  /// nothing are rejected.
  static StructuredPrompt build(const PromptRecord& record,
                                std::string_view scheme = kBuiltinScheme,
                                std::string_view restrict_text = kDefaultRestrict);

  /// Sections that are emitted on output (instruction, documents, question).
  std::size_t token_count() const;
  std::size_t document_tokens() const;

  /// Throws InvalidPromptError for an unknown id.
  const TokenSequence& section(std::string_view source_id) const;
  const std::string& scheme() const { return question.scheme(); }
};

struct RetainedSection {
  std::string source_id;
  std::vector<std::size_t> indices;  // strictly increasing
};

struct TokenOrigin {
  std::string source_id;
  std::size_t index = 0;

  friend bool operator==(const TokenOrigin&, const TokenOrigin&) = default;
};

/// Token-level subsequence of a StructuredPrompt.
///
/// Retained tokens are rendered with the gap that preceded them in their
/// source section, so subword pieces whose neighbours were dropped fuse
/// together; the first token of a section is rendered bare. Sections with
/// no retained tokens are skipped and the rest are joined with '\n'.
class CompressedPrompt {
 public:
  CompressedPrompt() = default;
  /// Throws InvalidPromptError when indices are out of range or not strictly
  /// increasing, or when a section id is unknown.
  CompressedPrompt(const StructuredPrompt& source, std::vector<RetainedSection> sections);

  const std::vector<RetainedSection>& sections() const { return sections_; }
  const std::string& rendered() const { return rendered_; }
  const std::vector<TokenOrigin>& origin_map() const { return origin_map_; }
  const std::string& scheme() const { return scheme_; }

  /// Retained tokens in rendered order, and the rendered text as a
  /// TokenSequence whose offsets point at those tokens.
  const TokenSequence& tokens() const { return tokens_; }
  std::size_t size() const { return origin_map_.size(); }

 private:
  std::vector<RetainedSection> sections_;
  std::string rendered_;
  std::vector<TokenOrigin> origin_map_;
  TokenSequence tokens_;
  std::string scheme_ = std::string(kBuiltinScheme);
};

std::string render(const CompressedPrompt& cp);

nlohmann::json origin_map_to_json(const std::vector<TokenOrigin>& origins);
std::vector<TokenOrigin> origin_map_from_json(const nlohmann::json& j);

}  // namespace squeeze
