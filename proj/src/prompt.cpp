#include "squeeze/prompt.hpp"

#include <charconv>

namespace squeeze {

using nlohmann::json;

std::string doc_source_id(std::size_t k) { return "doc:" + std::to_string(k); }

std::optional<std::size_t> parse_doc_source_id(std::string_view id) {
  constexpr std::string_view prefix = "doc:";
  if (id.size() <= prefix.size() || id.substr(0, prefix.size()) != prefix) return std::nullopt;
  std::size_t k = 0;
  const char* first = id.data() + prefix.size();
  const char* last = id.data() + id.size();
  auto [ptr, ec] = std::from_chars(first, last, k);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return k;
}

namespace {

std::string string_field(const json& j, const char* key, bool required) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw InvalidPromptError(std::string("missing field '") + key + "'");
    return {};
  }
  if (!it->is_string()) throw InvalidPromptError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::vector<std::string> string_list(const json& j, const char* key) {
  std::vector<std::string> out;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return out;
  if (!it->is_array()) throw InvalidPromptError(std::string("field '") + key + "' must be an array");
  for (const auto& v : *it) {
    if (!v.is_string()) throw InvalidPromptError(std::string("field '") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

constexpr std::string_view kNqInstruction =
    "Write a high-quality answer for the given question using only the provided search "
    "results (some of which might be irrelevant).";

PromptRecord parse_nq_record(const json& j) {
  PromptRecord r;
  r.instruction = j.contains("instruction") ? string_field(j, "instruction", false)
                                            : std::string(kNqInstruction);
  r.question = string_field(j, "question", true);
  r.answers = string_list(j, "answers");
  const json& ctxs = j.at("ctxs");
  if (!ctxs.is_array()) throw InvalidPromptError("field 'ctxs' must be an array");
  std::optional<std::size_t> first_with_answer;
  for (std::size_t k = 0; k < ctxs.size(); ++k) {
    const json& c = ctxs[k];
    if (!c.is_object()) throw InvalidPromptError("ctxs entries must be objects");
    const std::string title = string_field(c, "title", false);
    const std::string text = string_field(c, "text", true);
    r.documents.push_back("Document [" + std::to_string(k + 1) + "](Title: " + title + ") " + text);
    if (c.value("isgold", false) && !r.gold_doc_index) r.gold_doc_index = k;
    if (c.value("hasanswer", false) && !first_with_answer) first_with_answer = k;
  }
  if (!r.gold_doc_index) r.gold_doc_index = first_with_answer;
  return r;
}

}  // namespace

PromptRecord parse_prompt_record(const json& j) {
  if (!j.is_object()) throw InvalidPromptError("prompt record must be a JSON object");
  if (j.contains("ctxs")) return parse_nq_record(j);
  PromptRecord r;
  r.instruction = string_field(j, "instruction", false);
  r.documents = string_list(j, "documents");
  r.question = string_field(j, "question", true);
  r.answers = string_list(j, "answers");
  if (auto it = j.find("gold_doc_index"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<long long>() < 0) {
      throw InvalidPromptError("field 'gold_doc_index' must be a non-negative integer");
    }
    r.gold_doc_index = it->get<std::size_t>();
  }
  return r;
}

json to_json(const PromptRecord& r) {
  json j = {{"instruction", r.instruction}, {"documents", r.documents}, {"question", r.question}};
  if (!r.answers.empty()) j["answers"] = r.answers;
  if (r.gold_doc_index) j["gold_doc_index"] = *r.gold_doc_index;
  return j;
}

StructuredPrompt StructuredPrompt::build(const PromptRecord& record, std::string_view scheme,
                                         std::string_view restrict_text) {
  StructuredPrompt p;
  p.instruction = tokenize(record.instruction, scheme, std::string(kInstructionId));
  p.documents.reserve(record.documents.size());
  for (std::size_t k = 0; k < record.documents.size(); ++k) {
    p.documents.push_back(tokenize(record.documents[k], scheme, doc_source_id(k)));
    if (p.documents.back().empty()) {
      throw InvalidPromptError("document " + std::to_string(k) + " has no tokens");
    }
  }
  p.question = tokenize(record.question, scheme, std::string(kQuestionId));
  p.restrict = tokenize(std::string(restrict_text), scheme, std::string(kRestrictId));
  return p;
}

std::size_t StructuredPrompt::document_tokens() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.size();
  return n;
}

std::size_t StructuredPrompt::token_count() const {
  return instruction.size() + document_tokens() + question.size();
}

const TokenSequence& StructuredPrompt::section(std::string_view source_id) const {
  if (source_id == kInstructionId) return instruction;
  if (source_id == kQuestionId) return question;
  if (source_id == kRestrictId) return restrict;
  if (auto k = parse_doc_source_id(source_id); k && *k < documents.size()) return documents[*k];
  throw InvalidPromptError("unknown section '" + std::string(source_id) + "'");
}

CompressedPrompt::CompressedPrompt(const StructuredPrompt& source,
                                   std::vector<RetainedSection> sections)
    : sections_(std::move(sections)), scheme_(source.scheme()) {
  std::string text;
  std::vector<Span> spans;
  bool first_section = true;
  for (const RetainedSection& rs : sections_) {
    const TokenSequence& seq = source.section(rs.source_id);
    for (std::size_t n = 0; n < rs.indices.size(); ++n) {
      const std::size_t idx = rs.indices[n];
      if (idx >= seq.size() || (n > 0 && idx <= rs.indices[n - 1])) {
        throw InvalidPromptError("retained indices of '" + rs.source_id +
                                 "' must be strictly increasing and in range");
      }
    }
    if (rs.indices.empty()) continue;
    if (!first_section) text.push_back('\n');
    first_section = false;
    for (std::size_t n = 0; n < rs.indices.size(); ++n) {
      const std::size_t idx = rs.indices[n];
      if (n > 0) text.append(seq.gap_before(idx));
      spans.push_back({text.size(), text.size() + seq[idx].size()});
      text.append(seq[idx]);
      origin_map_.push_back({rs.source_id, idx});
    }
  }
  rendered_ = text;
  tokens_ = TokenSequence(std::move(text), std::move(spans), "compressed", scheme_);
}

std::string render(const CompressedPrompt& cp) { return cp.rendered(); }

json origin_map_to_json(const std::vector<TokenOrigin>& origins) {
  json arr = json::array();
  for (const auto& o : origins) arr.push_back(json::array({o.source_id, o.index}));
  return arr;
}

std::vector<TokenOrigin> origin_map_from_json(const json& j) {
  std::vector<TokenOrigin> out;
  for (const auto& e : j) {
    out.push_back({e.at(0).get<std::string>(), e.at(1).get<std::size_t>()});
  }
  return out;
}

}  // namespace squeeze
