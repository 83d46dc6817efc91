#include "squeeze/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <httplib.h>

#include "squeeze/bigram_scorer.hpp"
#include "squeeze/parallel.hpp"

namespace squeeze {

using nlohmann::json;

const std::vector<std::string>& synthetic_words() {
  static const std::vector<std::string> words{
      "river",   "stone",   "garden",  "window",  "market",  "silver",  "engine",  "harbor",
      "forest",  "candle",  "bridge",  "copper",  "valley",  "mirror",  "thunder", "lantern",
      "meadow",  "anchor",  "pepper",  "castle",  "shadow",  "feather", "marble",  "canyon",
      "orchard", "saddle",  "timber",  "velvet",  "glacier", "compass", "ribbon",  "falcon",
      "harvest", "pillow",  "quarry",  "rocket",  "summit",  "tunnel",  "walnut",  "zephyr",
      "basket",  "cobalt",  "desert",  "ember",   "fabric",  "goblet",  "hammer",  "island",
      "jigsaw",  "kettle",  "ladder",  "magnet",  "needle",  "oyster",  "parcel",  "quiver",
      "raven",   "spindle", "tablet",  "utensil", "violet",  "wagon",   "yarrow",  "zinnia",
      "acorn",   "beacon",  "cradle",  "dagger",  "easel",   "fountain", "gravel", "hollow",
      "ivory",   "jasmine", "kernel",  "lagoon",  "mosaic",  "nectar",  "obelisk", "pebble",
      "quill",   "rampart", "sapling", "trellis", "umber",   "vessel",  "willow",  "xylem",
      "yonder",  "zodiac",  "almond",  "bramble", "cinder",  "dune",    "estuary", "flint"};
  return words;
}

namespace {

constexpr const char* kSyntheticInstruction = "Answer the question using the documents below.";

// Token lists joined so that the builtin scheme splits them back exactly:
// words are space separated and "." attaches to the preceding word.
std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && tokens[i] != "." && tokens[i] != "?") out += ' ';
    out += tokens[i];
  }
  return out;
}

// Filler of exactly `length` tokens: sentences of 6 to 12 words, each
// closed by ".", and the last token is always ".".
std::vector<std::string> filler(std::mt19937_64& rng, std::size_t length, std::size_t vocabulary) {
  std::uniform_int_distribution<std::size_t> word(0, vocabulary - 1);
  std::uniform_int_distribution<std::size_t> sentence(6, 12);
  std::vector<std::string> out;
  out.reserve(length);
  std::size_t since = 0;
  std::size_t limit = sentence(rng);
  for (std::size_t i = 0; i < length; ++i) {
    if (i + 1 == length ? i > 0 : since >= limit) {
      out.emplace_back(".");
      since = 0;
      limit = sentence(rng);
    } else {
      out.push_back(synthetic_words()[word(rng)]);
      ++since;
    }
  }
  return out;
}

std::size_t builtin_size(const std::string& text) { return tokenize(text).size(); }

}  // namespace

PromptRecord make_synthetic(std::uint64_t seed, const SyntheticOptions& options) {
  const auto& words = synthetic_words();
  if (options.num_docs == 0) throw std::invalid_argument("synthetic instance needs documents");
  if (options.vocabulary == 0 || options.vocabulary > words.size()) {
    throw std::invalid_argument("synthetic vocabulary must lie in [1, " +
                                std::to_string(words.size()) + "]");
  }
  if (options.phrase_len == 0 || options.phrase_len > options.vocabulary) {
    throw std::invalid_argument("synthetic phrase length must lie in [1, vocabulary]");
  }
  std::mt19937_64 rng(seed);

  std::vector<std::size_t> pool(options.vocabulary);
  std::iota(pool.begin(), pool.end(), 0);
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<std::string> phrase;
  for (std::size_t i = 0; i < options.phrase_len; ++i) phrase.push_back(words[pool[i]]);
  const std::string answer = std::to_string(std::uniform_int_distribution<int>(1000, 2999)(rng));

  PromptRecord record;
  record.instruction = kSyntheticInstruction;
  std::vector<std::string> question_tokens{"which"};
  question_tokens.insert(question_tokens.end(), phrase.begin(), phrase.end());
  question_tokens.emplace_back("?");
  record.question = join_tokens(question_tokens);
  record.answers = {answer};

  std::vector<std::size_t> lengths(options.num_docs, options.doc_tokens);
  if (options.total_tokens) {
    const std::size_t fixed = builtin_size(record.instruction) + builtin_size(record.question);
    if (*options.total_tokens < fixed + options.num_docs) {
      throw std::invalid_argument("synthetic total_tokens too small for the documents");
    }
    const std::size_t budget = *options.total_tokens - fixed;
    for (std::size_t k = 0; k < options.num_docs; ++k) {
      lengths[k] = budget / options.num_docs + (k < budget % options.num_docs ? 1 : 0);
    }
  }

  const std::size_t gold =
      options.gold_position
          ? *options.gold_position
          : std::uniform_int_distribution<std::size_t>(0, options.num_docs - 1)(rng);
  if (gold >= options.num_docs) throw std::invalid_argument("gold position out of range");

  std::vector<std::string> block = phrase;
  block.insert(block.end(), {"is", answer, "."});
  for (std::size_t k = 0; k < options.num_docs; ++k) {
    if (k != gold) {
      record.documents.push_back(join_tokens(filler(rng, lengths[k], options.vocabulary)));
      continue;
    }
    if (lengths[k] < block.size() + 1) {
      throw std::invalid_argument("synthetic documents too short for the planted phrase");
    }
    std::vector<std::string> doc = filler(rng, lengths[k] - block.size(), options.vocabulary);
    // Plant at the start or right after one of the sentence ends.
    std::vector<std::size_t> slots{0};
    for (std::size_t i = 0; i + 1 < doc.size(); ++i) {
      if (doc[i] == ".") slots.push_back(i + 1);
    }
    const std::size_t at = slots[std::uniform_int_distribution<std::size_t>(0, slots.size() - 1)(rng)];
    doc.insert(doc.begin() + static_cast<std::ptrdiff_t>(at), block.begin(), block.end());
    record.documents.push_back(join_tokens(doc));
  }
  record.gold_doc_index = gold;
  return record;
}

std::vector<PromptRecord> synthetic_dataset(std::uint64_t seed, std::size_t count,
                                            const SyntheticOptions& options) {
  std::seed_seq seq{seed};
  std::vector<std::uint64_t> seeds(count);
  {
    std::vector<std::uint32_t> raw(2 * count);
    seq.generate(raw.begin(), raw.end());
    for (std::size_t i = 0; i < count; ++i) {
      seeds[i] = (std::uint64_t{raw[2 * i]} << 32) | raw[2 * i + 1];
    }
  }
  std::vector<PromptRecord> out;
  out.reserve(count);
  for (std::uint64_t s : seeds) out.push_back(make_synthetic(s, options));
  return out;
}

PromptRecord move_document(PromptRecord record, std::size_t from, std::size_t to) {
  auto& docs = record.documents;
  if (from >= docs.size() || to >= docs.size()) throw std::out_of_range("document slot");
  std::string moved = std::move(docs[from]);
  docs.erase(docs.begin() + static_cast<std::ptrdiff_t>(from));
  docs.insert(docs.begin() + static_cast<std::ptrdiff_t>(to), std::move(moved));
  if (record.gold_doc_index) {
    std::size_t g = *record.gold_doc_index;
    if (g == from) {
      g = to;
    } else {
      if (g > from) --g;
      if (g >= to) ++g;
    }
    record.gold_doc_index = g;
  }
  return record;
}

std::vector<double> bm25_scores(const std::vector<std::string>& query,
                                const std::vector<std::vector<std::string>>& docs, double k1,
                                double b) {
  const double n = static_cast<double>(docs.size());
  double avg_len = 0.0;
  std::map<std::string, std::size_t, std::less<>> df;
  std::vector<std::map<std::string, std::size_t, std::less<>>> tf(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    avg_len += static_cast<double>(docs[d].size());
    for (const auto& t : docs[d]) ++tf[d][t];
    for (const auto& [term, count] : tf[d]) ++df[term];
  }
  if (!docs.empty()) avg_len /= n;

  std::vector<double> scores(docs.size(), 0.0);
  for (const auto& term : query) {
    auto it = df.find(term);
    if (it == df.end()) continue;
    const double dfv = static_cast<double>(it->second);
    const double idf = std::log((n - dfv + 0.5) / (dfv + 0.5) + 1.0);
    for (std::size_t d = 0; d < docs.size(); ++d) {
      auto f = tf[d].find(term);
      if (f == tf[d].end()) continue;
      const double freq = static_cast<double>(f->second);
      const double norm = avg_len > 0.0 ? static_cast<double>(docs[d].size()) / avg_len : 1.0;
      scores[d] += idf * freq * (k1 + 1.0) / (freq + k1 * (1.0 - b + b * norm));
    }
  }
  return scores;
}

std::vector<std::size_t> rank_by(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

double RecallStats::at(std::size_t k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return recall[i];
  }
  throw std::out_of_range("recall@" + std::to_string(k) + " was not computed");
}

json RecallStats::to_json() const {
  json j = {{"evaluated", evaluated}, {"skipped", skipped}};
  for (std::size_t i = 0; i < ks.size(); ++i) {
    j["recall@" + std::to_string(ks[i])] = evaluated ? json(recall[i]) : json(nullptr);
  }
  return j;
}

RecallStats recall_at(const std::vector<std::vector<std::size_t>>& rankings,
                      const std::vector<std::optional<std::size_t>>& gold,
                      const std::vector<std::size_t>& ks) {
  if (rankings.size() != gold.size()) {
    throw std::invalid_argument("one gold index is needed per ranking");
  }
  RecallStats stats;
  stats.ks = ks;
  stats.recall.assign(ks.size(), 0.0);
  for (std::size_t r = 0; r < rankings.size(); ++r) {
    if (!gold[r]) {
      ++stats.skipped;
      continue;
    }
    ++stats.evaluated;
    const auto& ranking = rankings[r];
    const auto pos = std::find(ranking.begin(), ranking.end(), *gold[r]) - ranking.begin();
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (static_cast<std::size_t>(pos) < ks[i]) stats.recall[i] += 1.0;
    }
  }
  if (stats.evaluated > 0) {
    for (double& v : stats.recall) v /= static_cast<double>(stats.evaluated);
  }
  return stats;
}

std::optional<std::string> ask_llm(const LlmEndpoint& endpoint, const std::string& prompt,
                                   std::string& error) {
  try {
    httplib::Client client(endpoint.url);
    const auto timeout = std::chrono::duration<double>(endpoint.timeout_seconds);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    httplib::Headers headers;
    if (const char* key = std::getenv("SQUEEZE_API_KEY")) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const json body = {{"model", endpoint.model},
                       {"prompt", prompt},
                       {"max_tokens", endpoint.max_tokens},
                       {"temperature", 0}};
    auto res = client.Post("/v1/completions", headers, body.dump(), "application/json");
    if (!res) {
      error = "LLM endpoint " + endpoint.url + " unreachable: " + httplib::to_string(res.error());
      return std::nullopt;
    }
    if (res->status != 200) {
      error = "LLM endpoint returned HTTP " + std::to_string(res->status);
      return std::nullopt;
    }
    return json::parse(res->body).at("choices").at(0).at("text").get<std::string>();
  } catch (const std::exception& e) {
    error = std::string("LLM endpoint: ") + e.what();
    return std::nullopt;
  }
}

bool answer_matches(const std::string& response, const std::vector<std::string>& answers) {
  const auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };
  const std::string hay = lower(response);
  return std::any_of(answers.begin(), answers.end(), [&](const std::string& a) {
    return !a.empty() && hay.find(lower(a)) != std::string::npos;
  });
}

namespace {

struct Cell {
  bool gold_kept = false;
  double phrase_kept = 0.0;
  bool answer_kept = false;
  std::size_t compressed_tokens = 0;
  double ratio = 1.0;
  std::optional<bool> correct;
};

// Indices of the planted block (phrase, "is", answer, ".") in the gold document.
std::vector<std::size_t> planted_indices(const TokenSequence& gold, const std::string& question,
                                         const std::string& answer) {
  const TokenSequence q = tokenize(question);
  std::vector<std::string> block(q.tokens().begin() + 1, q.tokens().end() - 1);
  block.insert(block.end(), {"is", answer, "."});
  const auto& t = gold.tokens();
  auto it = std::search(t.begin(), t.end(), block.begin(), block.end());
  std::vector<std::size_t> out;
  if (it == t.end()) return out;
  const auto start = static_cast<std::size_t>(it - t.begin());
  for (std::size_t i = 0; i < block.size(); ++i) out.push_back(start + i);
  return out;
}

std::string fmt(double v, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

SweepReport run_position_sweep(const SweepConfig& config) {
  if (config.positions.empty() || config.ratios.empty()) {
    throw ConfigError("sweep needs at least one position and one ratio");
  }
  for (std::size_t p : config.positions) {
    if (p == 0 || p > config.synthetic.num_docs) {
      throw ConfigError("sweep position " + std::to_string(p) + " outside 1.." +
                        std::to_string(config.synthetic.num_docs));
    }
  }
  for (double r : config.ratios) {
    if (!(r >= 1.0)) throw ConfigError("sweep ratios must be >= 1");
  }

  SyntheticOptions opts = config.synthetic;
  opts.gold_position = 0;
  const std::vector<PromptRecord> base = synthetic_dataset(config.seed, config.instances, opts);

  const std::size_t rows = config.positions.size() * config.ratios.size();
  std::vector<std::vector<Cell>> cells(config.instances, std::vector<Cell>(rows));
  std::atomic<bool> llm_ok = config.llm.has_value();
  std::mutex warn_mu;
  std::string llm_error;

  parallel_for(config.instances, config.jobs, [&](std::size_t n) {
    const BigramScorer scorer = BigramScorer::from_texts(
        corpus_texts({base[n]}), config.pipeline.scheme, config.pipeline.scorer.cache_weight);
    std::size_t row = 0;
    for (std::size_t p : config.positions) {
      const PromptRecord record = move_document(base[n], 0, p - 1);
      const std::size_t gold = *record.gold_doc_index;
      const StructuredPrompt prompt =
          StructuredPrompt::build(record, config.pipeline.scheme, config.pipeline.restrict_text);
      const auto planted = planted_indices(prompt.documents[gold], record.question, record.answers[0]);
      for (double ratio : config.ratios) {
        PipelineConfig pc = config.pipeline;
        pc.target_tokens.reset();
        pc.ratio = ratio;
        const CompressionOutput out = compress(prompt, pc, scorer);
        Cell& cell = cells[n][row++];
        cell.compressed_tokens = out.report.compressed_tokens;
        cell.ratio = out.report.ratio;
        for (const RetainedSection& s : out.compressed.sections()) {
          if (s.source_id != doc_source_id(gold)) continue;
          cell.gold_kept = true;
          std::size_t kept = 0;
          for (std::size_t idx : planted) {
            if (std::binary_search(s.indices.begin(), s.indices.end(), idx)) ++kept;
          }
          if (!planted.empty()) {
            cell.phrase_kept = static_cast<double>(kept) / static_cast<double>(planted.size());
            cell.answer_kept = std::binary_search(s.indices.begin(), s.indices.end(),
                                                  planted[planted.size() - 2]);
          }
        }
        if (llm_ok.load()) {
          std::string error;
          auto reply = ask_llm(*config.llm, out.compressed.rendered() + "\nAnswer:", error);
          if (reply) {
            cell.correct = answer_matches(*reply, record.answers);
          } else {
            llm_ok = false;
            std::lock_guard lock(warn_mu);
            if (llm_error.empty()) llm_error = error;
          }
        }
      }
    }
  });

  SweepReport report;
  std::size_t row = 0;
  for (std::size_t p : config.positions) {
    for (double ratio : config.ratios) {
      SweepRow r;
      r.position = p;
      r.ratio = ratio;
      r.instances = config.instances;
      double correct = 0.0;
      for (std::size_t n = 0; n < config.instances; ++n) {
        const Cell& c = cells[n][row];
        r.gold_doc_kept += c.gold_kept ? 1.0 : 0.0;
        r.gold_phrase_kept += c.phrase_kept;
        r.answer_kept += c.answer_kept ? 1.0 : 0.0;
        r.mean_compressed_tokens += static_cast<double>(c.compressed_tokens);
        r.mean_ratio += c.ratio;
        if (c.correct && *c.correct) correct += 1.0;
      }
      if (config.instances > 0) {
        const double count = static_cast<double>(config.instances);
        r.gold_doc_kept /= count;
        r.gold_phrase_kept /= count;
        r.answer_kept /= count;
        r.mean_compressed_tokens /= count;
        r.mean_ratio /= count;
        if (config.llm && llm_ok.load()) r.accuracy = correct / count;
      }
      report.rows.push_back(r);
      ++row;
    }
  }
  if (config.llm && !llm_ok.load()) {
    report.warnings.push_back(llm_error + "; accuracy omitted, compression metrics only");
  }
  return report;
}

json SweepReport::to_json() const {
  json j_rows = json::array();
  for (const SweepRow& r : rows) {
    j_rows.push_back({{"position", r.position},
                      {"ratio", r.ratio},
                      {"instances", r.instances},
                      {"gold_doc_kept", r.gold_doc_kept},
                      {"gold_phrase_kept", r.gold_phrase_kept},
                      {"answer_kept", r.answer_kept},
                      {"mean_compressed_tokens", r.mean_compressed_tokens},
                      {"mean_ratio", r.mean_ratio},
                      {"accuracy", r.accuracy ? json(*r.accuracy) : json(nullptr)}});
  }
  return {{"rows", j_rows}, {"warnings", warnings}};
}

std::string SweepReport::table() const {
  std::vector<std::vector<std::string>> cells;
  for (const SweepRow& r : rows) {
    cells.push_back({std::to_string(r.position), fmt(r.ratio, 1), std::to_string(r.instances),
                     fmt(r.gold_doc_kept, 3), fmt(r.gold_phrase_kept, 3), fmt(r.answer_kept, 3),
                     fmt(r.mean_compressed_tokens, 1), fmt(r.mean_ratio, 2),
                     r.accuracy ? fmt(*r.accuracy, 3) : "-"});
  }
  return format_table({"position", "ratio", "n", "gold_doc", "gold_phrase", "answer", "tokens",
                       "1/tau", "accuracy"},
                      cells);
}

std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) {
      width[c] = std::max(width[c], row[c].size());
    }
  }
  std::ostringstream os;
  const auto line = [&](const std::vector<std::string>& cells) {
    std::string text;
    for (std::size_t c = 0; c < width.size(); ++c) {
      std::string cell = c < cells.size() ? cells[c] : "";
      if (c + 1 < width.size()) cell.resize(width[c] + 2, ' ');
      text += cell;
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    os << text << '\n';
  };
  line(header);
  for (const auto& row : rows) line(row);
  return os.str();
}

}  // namespace squeeze
