#include "squeeze/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "squeeze/bigram_scorer.hpp"
#include "squeeze/coarse.hpp"
#include "squeeze/http_scorer.hpp"
#include "squeeze/parallel.hpp"

namespace squeeze {

using nlohmann::json;

namespace {

template <class T>
T get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown " + where + " key '" + key + "'");
  }
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"target_tokens", "ratio", "tau_ins", "tau_que", "delta_tau", "granular_k",
                  "segment_size", "reorder", "restrict_text", "scheme", "question_position",
                  "scorer", "prices"},
                 "config");
  PipelineConfig c;
  if (j.contains("target_tokens")) c.target_tokens = get_as<std::size_t>(j, "target_tokens");
  if (j.contains("ratio")) c.ratio = get_as<double>(j, "ratio");
  if (j.contains("tau_ins")) c.tau_ins = get_as<double>(j, "tau_ins");
  if (j.contains("tau_que")) c.tau_que = get_as<double>(j, "tau_que");
  if (j.contains("delta_tau")) c.delta_tau = get_as<double>(j, "delta_tau");
  if (j.contains("granular_k")) c.granular_k = get_as<double>(j, "granular_k");
  if (j.contains("segment_size")) c.segment_size = get_as<std::size_t>(j, "segment_size");
  if (j.contains("reorder")) {
    const json& r = j.at("reorder");
    if (r.is_boolean()) {
      c.reorder = r.get<bool>();
    } else if (r == "on" || r == "off") {
      c.reorder = r == "on";
    } else {
      throw ConfigError("config key 'reorder' must be true/false or \"on\"/\"off\"");
    }
  }
  if (j.contains("restrict_text")) c.restrict_text = get_as<std::string>(j, "restrict_text");
  if (j.contains("scheme")) c.scheme = get_as<std::string>(j, "scheme");
  if (j.contains("question_position")) {
    const auto pos = get_as<std::string>(j, "question_position");
    if (pos == "before") {
      c.question_position = QuestionPosition::kBeforePrefix;
    } else if (pos == "after") {
      c.question_position = QuestionPosition::kAfterPrefix;
    } else {
      throw ConfigError("config key 'question_position' must be \"before\" or \"after\"");
    }
  }
  if (j.contains("scorer")) {
    const json& s = j.at("scorer");
    if (!s.is_object()) throw ConfigError("config key 'scorer' must be an object");
    c.scorer.kind = s.value("kind", std::string("builtin"));
    if (c.scorer.kind == "builtin") {
      reject_unknown(s, {"kind", "corpus", "cache_weight"}, "builtin scorer");
      if (s.contains("corpus")) c.scorer.corpus_path = get_as<std::string>(s, "corpus");
      if (s.contains("cache_weight")) c.scorer.cache_weight = get_as<double>(s, "cache_weight");
    } else if (c.scorer.kind == "http") {
      c.scorer.http = s;
      c.scorer.http.erase("kind");
      try {
        HttpScorerConfig::from_json(c.scorer.http);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("http scorer: ") + e.what());
      }
    } else {
      throw ConfigError("unknown scorer kind '" + c.scorer.kind + "'");
    }
  }
  if (j.contains("prices")) {
    const json& p = j.at("prices");
    reject_unknown(p, {"input_per_1k", "output_per_1k"}, "prices");
    Prices prices;
    if (p.contains("input_per_1k")) prices.input_per_1k = get_as<double>(p, "input_per_1k");
    if (p.contains("output_per_1k")) prices.output_per_1k = get_as<double>(p, "output_per_1k");
    c.prices = prices;
  }
  return c;
}

json PipelineConfig::to_json() const {
  json j = {{"tau_ins", tau_ins},
            {"tau_que", tau_que},
            {"delta_tau", delta_tau},
            {"granular_k", granular_k},
            {"segment_size", segment_size},
            {"reorder", reorder},
            {"restrict_text", restrict_text},
            {"scheme", scheme},
            {"question_position",
             question_position == QuestionPosition::kBeforePrefix ? "before" : "after"}};
  if (target_tokens) j["target_tokens"] = *target_tokens;
  if (ratio) j["ratio"] = *ratio;
  json s = scorer.kind == "http" ? scorer.http : json::object();
  s["kind"] = scorer.kind;
  if (scorer.kind == "builtin") {
    s["cache_weight"] = scorer.cache_weight;
    if (scorer.corpus_path) s["corpus"] = *scorer.corpus_path;
  }
  j["scorer"] = s;
  if (prices) {
    j["prices"] = {{"input_per_1k", prices->input_per_1k}, {"output_per_1k", prices->output_per_1k}};
  }
  return j;
}

void PipelineConfig::validate() const {
  if (target_tokens.has_value() == ratio.has_value()) {
    throw ConfigError("exactly one of target_tokens and ratio must be set");
  }
  if (target_tokens && *target_tokens == 0) throw ConfigError("target_tokens must be positive");
  if (ratio && !(*ratio >= 1.0 && std::isfinite(*ratio))) {
    throw ConfigError("ratio must be a finite value >= 1");
  }
  const auto ratio_ok = [](double t) { return t > 0.0 && t <= 1.0; };
  if (!ratio_ok(tau_ins)) throw ConfigError("tau_ins must lie in (0, 1]");
  if (!ratio_ok(tau_que)) throw ConfigError("tau_que must lie in (0, 1]");
  if (!(delta_tau >= 0.0 && std::isfinite(delta_tau))) throw ConfigError("delta_tau must be >= 0");
  if (!(granular_k >= 1.0 && std::isfinite(granular_k))) throw ConfigError("granular_k must be >= 1");
  if (segment_size == 0) throw ConfigError("segment_size must be positive");
  if (!(scorer.cache_weight >= 0.0 && scorer.cache_weight <= 1.0)) {
    throw ConfigError("scorer cache_weight must lie in [0, 1]");
  }
  if (!SchemeRegistry::global().contains(scheme)) {
    throw ConfigError("unknown tokenization scheme '" + scheme + "'");
  }
}

std::size_t PipelineConfig::resolve_target(std::size_t original_tokens) const {
  validate();
  if (target_tokens) return *target_tokens;
  return static_cast<std::size_t>(std::ceil(static_cast<double>(original_tokens) / *ratio));
}

json CompressionReport::to_json() const {
  json docs = json::array();
  for (const DocReport& d : per_doc) {
    docs.push_back({{"doc_index", d.doc_index},
                    {"token_count", d.token_count},
                    {"importance", d.importance ? json(*d.importance) : json(nullptr)},
                    {"rank_index", d.rank_index ? json(*d.rank_index) : json(nullptr)},
                    {"tau", d.tau},
                    {"retained_tokens", d.retained_tokens}});
  }
  json j = {{"original_tokens", original_tokens},
            {"compressed_tokens", compressed_tokens},
            {"target_tokens", target_tokens},
            {"ratio", std::isfinite(ratio) ? json(ratio) : json(nullptr)},
            {"tau_doc", tau_doc},
            {"per_doc", docs},
            {"elapsed_ms", elapsed_ms},
            {"warnings", warnings}};
  if (estimated_cost_savings) j["estimated_cost_savings"] = *estimated_cost_savings;
  return j;
}

CompressionOutput compress(const StructuredPrompt& prompt, const PipelineConfig& config,
                           const Scorer& scorer, std::size_t jobs) {
  const auto started = std::chrono::steady_clock::now();
  CompressionReport report;
  report.original_tokens = prompt.token_count();
  report.target_tokens = config.resolve_target(report.original_tokens);

  std::vector<RetainedSection> sections;
  const auto all_of = [](const TokenSequence& seq) {
    RetainedSection rs{seq.source_id(), std::vector<std::size_t>(seq.size())};
    for (std::size_t i = 0; i < seq.size(); ++i) rs.indices[i] = i;
    return rs;
  };
  report.per_doc.resize(prompt.documents.size());
  for (std::size_t k = 0; k < prompt.documents.size(); ++k) {
    report.per_doc[k].doc_index = k;
    report.per_doc[k].token_count = prompt.documents[k].size();
  }

  if (report.target_tokens >= report.original_tokens) {
    sections.push_back(all_of(prompt.instruction));
    for (std::size_t k = 0; k < prompt.documents.size(); ++k) {
      sections.push_back(all_of(prompt.documents[k]));
      report.per_doc[k].rank_index = k;
      report.per_doc[k].tau = 1.0;
      report.per_doc[k].retained_tokens = prompt.documents[k].size();
    }
    sections.push_back(all_of(prompt.question));
  } else {
    if (prompt.question.empty()) {
      throw InvalidPromptError("question-aware compression needs a non-empty question");
    }
    std::vector<ScoredDocument> retained;
    if (!prompt.documents.empty()) {
      const auto coarse_budget = static_cast<std::size_t>(
          std::ceil(config.granular_k * static_cast<double>(report.target_tokens)));
      const std::vector<double> r = document_importances(prompt, scorer);
      std::vector<ScoredDocument> scored;
      for (std::size_t k = 0; k < r.size(); ++k) {
        scored.push_back({k, r[k], 0, prompt.documents[k].size()});
        report.per_doc[k].importance = r[k];
      }
      retained = select_documents(std::move(scored), std::max<std::size_t>(coarse_budget, 1));
    }

    BudgetSettings settings{report.target_tokens, config.tau_ins, config.tau_que,
                            config.delta_tau, config.segment_size};
    const CompressionPlan plan = plan_budget(prompt, retained, settings);
    report.tau_doc = plan.tau_doc;
    report.warnings = plan.warnings;

    std::vector<ScoredDocument> order = retained;
    if (!config.reorder) {
      std::sort(order.begin(), order.end(),
                [](const auto& a, const auto& b) { return a.doc_index < b.doc_index; });
    }

    std::vector<std::vector<std::size_t>> kept(order.size());
    parallel_for(order.size(), jobs, [&](std::size_t n) {
      const TokenSequence& doc = prompt.documents[order[n].doc_index];
      kept[n] = compress_question_aware(doc, prompt.question, plan.per_doc_tau.at(order[n].doc_index),
                                        scorer, SegmentPlan::for_length(doc.size(), config.segment_size),
                                        config.question_position);
    });
    const auto ins_kept =
        compress_plain(prompt.instruction, config.tau_ins, scorer,
                       SegmentPlan::for_length(prompt.instruction.size(), config.segment_size));
    const auto que_kept =
        compress_plain(prompt.question, config.tau_que, scorer,
                       SegmentPlan::for_length(prompt.question.size(), config.segment_size));

    sections.push_back({prompt.instruction.source_id(), ins_kept});
    for (std::size_t n = 0; n < order.size(); ++n) {
      DocReport& d = report.per_doc[order[n].doc_index];
      d.rank_index = order[n].rank_index;
      d.tau = plan.per_doc_tau.at(order[n].doc_index);
      d.retained_tokens = kept[n].size();
      sections.push_back({prompt.documents[order[n].doc_index].source_id(), std::move(kept[n])});
    }
    sections.push_back({prompt.question.source_id(), que_kept});
  }

  CompressedPrompt compressed(prompt, std::move(sections));
  report.compressed_tokens = compressed.size();
  report.ratio = report.compressed_tokens == 0
                     ? std::numeric_limits<double>::infinity()
                     : static_cast<double>(report.original_tokens) /
                           static_cast<double>(report.compressed_tokens);
  if (config.prices) {
    report.estimated_cost_savings =
        static_cast<double>(report.original_tokens - report.compressed_tokens) / 1000.0 *
        config.prices->input_per_1k;
  }
  report.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return {std::move(compressed), std::move(report)};
}

std::vector<std::string> corpus_texts(const std::vector<PromptRecord>& records) {
  std::vector<std::string> texts;
  for (const auto& r : records) {
    if (!r.instruction.empty()) texts.push_back(r.instruction);
    texts.insert(texts.end(), r.documents.begin(), r.documents.end());
    if (!r.question.empty()) texts.push_back(r.question);
  }
  return texts;
}

std::unique_ptr<Scorer> make_scorer(const ScorerSettings& settings, std::string_view scheme,
                                    const std::vector<std::string>& fallback_corpus) {
  if (settings.kind == "http") {
    try {
      return std::make_unique<HttpScorer>(HttpScorerConfig::from_json(settings.http));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("http scorer: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("http scorer: ") + e.what());
    }
  }
  if (settings.kind != "builtin") throw ConfigError("unknown scorer kind '" + settings.kind + "'");
  if (!settings.corpus_path) {
    return std::make_unique<BigramScorer>(
        BigramScorer::from_texts(fallback_corpus, scheme, settings.cache_weight));
  }
  std::ifstream in(*settings.corpus_path);
  if (!in) throw std::runtime_error("cannot open scorer corpus " + *settings.corpus_path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return std::make_unique<BigramScorer>(
      BigramScorer::from_texts(lines, scheme, settings.cache_weight));
}

}  // namespace squeeze
