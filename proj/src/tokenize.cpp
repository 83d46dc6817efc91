#include "squeeze/tokenize.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <shared_mutex>

namespace squeeze {

TokenSequence::TokenSequence(std::string text, std::vector<Span> offsets,
                             std::string source_id, std::string scheme)
    : text_(std::move(text)),
      offsets_(std::move(offsets)),
      source_id_(std::move(source_id)),
      scheme_(std::move(scheme)) {
  tokens_.reserve(offsets_.size());
  std::size_t prev_end = 0;
  for (const Span& s : offsets_) {
    if (s.begin >= s.end || s.end > text_.size() || s.begin < prev_end) {
      throw std::invalid_argument("token offsets must be non-empty, in range and increasing");
    }
    tokens_.emplace_back(text_, s.begin, s.end - s.begin);
    prev_end = s.end;
  }
}

std::string_view TokenSequence::gap_before(std::size_t i) const {
  const std::size_t start = i == 0 ? 0 : offsets_[i - 1].end;
  return std::string_view(text_).substr(start, offsets_[i].begin - start);
}

std::string_view TokenSequence::trailing() const {
  const std::size_t start = offsets_.empty() ? 0 : offsets_.back().end;
  return std::string_view(text_).substr(start);
}

TokenSequence TokenSequence::with_source_id(std::string source_id) const {
  TokenSequence copy = *this;
  copy.source_id_ = std::move(source_id);
  return copy;
}

std::string detokenize(const TokenSequence& seq) {
  std::string out;
  out.reserve(seq.text().size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    out.append(seq.gap_before(i));
    out.append(seq[i]);
  }
  out.append(seq.trailing());
  return out;
}

std::vector<std::string> concat_tokens(const std::vector<const TokenSequence*>& parts) {
  std::vector<std::string> out;
  for (const TokenSequence* p : parts) {
    out.insert(out.end(), p->tokens().begin(), p->tokens().end());
  }
  return out;
}

std::size_t utf8_length(std::string_view text, std::size_t pos) {
  const auto lead = static_cast<unsigned char>(text[pos]);
  std::size_t len = 1;
  if (lead >= 0xF0 && lead < 0xF8) {
    len = 4;
  } else if (lead >= 0xE0) {
    len = lead < 0xF0 ? 3 : 1;
  } else if (lead >= 0xC0) {
    len = 2;
  }
  if (pos + len > text.size()) return 1;
  for (std::size_t k = 1; k < len; ++k) {
    if ((static_cast<unsigned char>(text[pos + k]) & 0xC0) != 0x80) return 1;
  }
  return len;
}

std::size_t whitespace_length(std::string_view text, std::size_t pos) {
  const auto at = [&](std::size_t k) {
    return pos + k < text.size() ? static_cast<unsigned char>(text[pos + k]) : 0u;
  };
  const unsigned c = at(0);
  if (c == ' ' || (c >= '\t' && c <= '\r')) return 1;
  if (c == 0xC2 && (at(1) == 0x85 || at(1) == 0xA0)) return 2;
  if (c == 0xE1 && at(1) == 0x9A && at(2) == 0x80) return 3;  // U+1680
  if (c == 0xE2 && at(1) == 0x80) {
    const unsigned t = at(2);
    if ((t >= 0x80 && t <= 0x8A) || t == 0xA8 || t == 0xA9 || t == 0xAF) return 3;
  }
  if (c == 0xE2 && at(1) == 0x81 && at(2) == 0x9F) return 3;  // U+205F
  if (c == 0xE3 && at(1) == 0x80 && at(2) == 0x80) return 3;  // U+3000
  return 0;
}

namespace {

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 0x21 && u <= 0x2F) || (u >= 0x3A && u <= 0x40) || (u >= 0x5B && u <= 0x60) ||
         (u >= 0x7B && u <= 0x7E);
}

}  // namespace

std::vector<Span> WhitespacePunctScheme::split(std::string_view text) const {
  std::vector<Span> spans;
  std::size_t pos = 0;
  std::size_t word_start = std::string_view::npos;
  const auto flush = [&](std::size_t end) {
    if (word_start != std::string_view::npos) {
      spans.push_back({word_start, end});
      word_start = std::string_view::npos;
    }
  };
  while (pos < text.size()) {
    if (const std::size_t ws = whitespace_length(text, pos); ws > 0) {
      flush(pos);
      pos += ws;
    } else if (is_ascii_punct(text[pos])) {
      flush(pos);
      spans.push_back({pos, pos + 1});
      ++pos;
    } else {
      if (word_start == std::string_view::npos) word_start = pos;
      pos += utf8_length(text, pos);
    }
  }
  flush(text.size());
  return spans;
}

std::vector<Span> CharScheme::split(std::string_view text) const {
  std::vector<Span> spans;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (const std::size_t ws = whitespace_length(text, pos); ws > 0) {
      pos += ws;
      continue;
    }
    const std::size_t len = utf8_length(text, pos);
    spans.push_back({pos, pos + len});
    pos += len;
  }
  return spans;
}

VocabScheme::VocabScheme(std::string id, std::vector<std::string> vocabulary)
    : id_(std::move(id)), vocabulary_(std::move(vocabulary)) {
  std::erase_if(vocabulary_, [](const std::string& s) { return s.empty(); });
  std::sort(vocabulary_.begin(), vocabulary_.end());
  vocabulary_.erase(std::unique(vocabulary_.begin(), vocabulary_.end()), vocabulary_.end());
  for (const auto& v : vocabulary_) max_len_ = std::max(max_len_, v.size());
}

std::shared_ptr<VocabScheme> VocabScheme::from_file(std::string id, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file " + path);
  std::vector<std::string> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) entries.push_back(line);
  }
  return std::make_shared<VocabScheme>(std::move(id), std::move(entries));
}

std::vector<Span> VocabScheme::split(std::string_view text) const {
  std::vector<Span> spans;
  for (const Span& chunk : WhitespacePunctScheme().split(text)) {
    std::size_t pos = chunk.begin;
    while (pos < chunk.end) {
      std::size_t take = 0;
      const std::size_t limit = std::min(max_len_, chunk.end - pos);
      for (std::size_t len = limit; len > 0; --len) {
        if (std::binary_search(vocabulary_.begin(), vocabulary_.end(), text.substr(pos, len))) {
          take = len;
          break;
        }
      }
      if (take == 0) take = std::min(utf8_length(text, pos), chunk.end - pos);
      spans.push_back({pos, pos + take});
      pos += take;
    }
  }
  return spans;
}

struct SchemeRegistry::Impl {
  mutable std::shared_mutex mu;
  std::map<std::string, std::shared_ptr<const TokenizerScheme>, std::less<>> schemes;
};

SchemeRegistry::SchemeRegistry() : impl_(std::make_shared<Impl>()) {
  add(std::make_shared<WhitespacePunctScheme>());
  add(std::make_shared<CharScheme>());
}

SchemeRegistry& SchemeRegistry::global() {
  static SchemeRegistry registry;
  return registry;
}

void SchemeRegistry::add(std::shared_ptr<const TokenizerScheme> scheme) {
  std::unique_lock lock(impl_->mu);
  impl_->schemes[scheme->id()] = std::move(scheme);
}

std::shared_ptr<const TokenizerScheme> SchemeRegistry::find(std::string_view id) const {
  {
    std::shared_lock lock(impl_->mu);
    auto it = impl_->schemes.find(id);
    if (it != impl_->schemes.end()) return it->second;
  }
  // "vocab:<path>" loads a vocabulary file on first use.
  constexpr std::string_view vocab_prefix = "vocab:";
  if (id.size() > vocab_prefix.size() && id.substr(0, vocab_prefix.size()) == vocab_prefix) {
    std::shared_ptr<const TokenizerScheme> scheme;
    try {
      scheme = VocabScheme::from_file(std::string(id), std::string(id.substr(vocab_prefix.size())));
    } catch (const std::runtime_error&) {
      throw UnknownSchemeError(std::string(id));
    }
    std::unique_lock lock(impl_->mu);
    return impl_->schemes.try_emplace(std::string(id), scheme).first->second;
  }
  throw UnknownSchemeError(std::string(id));
}

bool SchemeRegistry::contains(std::string_view id) const {
  try {
    find(id);
    return true;
  } catch (const UnknownSchemeError&) {
    return false;
  }
}

TokenSequence tokenize(std::string text, std::string_view scheme, std::string source_id) {
  auto impl = SchemeRegistry::global().find(scheme);
  std::vector<Span> spans = impl->split(text);
  return TokenSequence(std::move(text), std::move(spans), std::move(source_id), impl->id());
}

}  // namespace squeeze
