#include "squeeze/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "squeeze/bench.hpp"
#include "squeeze/coarse.hpp"
#include "squeeze/parallel.hpp"
#include "squeeze/pipeline.hpp"
#include "squeeze/recovery.hpp"

namespace squeeze {

using nlohmann::json;

namespace {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string config_path;
  std::string scorer;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool quiet = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct NumberedRecord {
  std::size_t line = 0;
  PromptRecord record;
};

std::vector<NumberedRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::vector<NumberedRecord> out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back({line_no, parse_prompt_record(json::parse(line))});
    } catch (const json::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    } catch (const InvalidPromptError& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

PipelineConfig load_config(const GlobalOptions& g) {
  PipelineConfig config;
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw ConfigError("cannot read config " + g.config_path);
    try {
      config = PipelineConfig::from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw ConfigError("config " + g.config_path + ": " + e.what());
    }
  }
  if (g.scorer == "builtin" || g.scorer == "http") {
    config.scorer.kind = g.scorer;
  } else if (!g.scorer.empty()) {
    std::ifstream in(g.scorer);
    if (!in) throw ConfigError("--scorer must be builtin, http or a scorer JSON file");
    try {
      config.scorer = PipelineConfig::from_json({{"scorer", json::parse(in)}}).scorer;
    } catch (const json::exception& e) {
      throw ConfigError("scorer " + g.scorer + ": " + e.what());
    }
  }
  if (config.scorer.kind == "http" && config.scorer.http.empty()) {
    throw ConfigError("http scorer selected but no scorer settings were given");
  }
  return config;
}

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw IoError("cannot write " + path);
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

StructuredPrompt build_prompt(const NumberedRecord& r, const PipelineConfig& config) {
  try {
    return StructuredPrompt::build(r.record, config.scheme, config.restrict_text);
  } catch (const InvalidPromptError& e) {
    throw IoError("line " + std::to_string(r.line) + ": " + e.what());
  }
}

std::string fixed(double v, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

// compress -------------------------------------------------------------------

struct CompressOptions {
  std::string in;
  std::string out;
  std::optional<std::size_t> target_tokens;
  std::optional<double> ratio;
  std::string reorder;
  std::optional<std::size_t> segment_size;
};

int cmd_compress(const GlobalOptions& g, const CompressOptions& o, std::ostream& out,
                 std::ostream& err) {
  PipelineConfig config = load_config(g);
  if (o.target_tokens) {
    config.target_tokens = o.target_tokens;
    config.ratio.reset();
  }
  if (o.ratio) {
    config.ratio = o.ratio;
    config.target_tokens.reset();
  }
  if (!o.reorder.empty()) config.reorder = o.reorder == "on";
  if (o.segment_size) config.segment_size = *o.segment_size;
  config.validate();

  const auto records = read_records(o.in);
  std::vector<PromptRecord> plain;
  for (const auto& r : records) plain.push_back(r.record);
  const auto scorer = make_scorer(config.scorer, config.scheme, corpus_texts(plain));

  std::vector<json> lines(records.size());
  std::vector<CompressionReport> reports(records.size());
  parallel_for(records.size(), g.jobs, [&](std::size_t n) {
    const StructuredPrompt prompt = build_prompt(records[n], config);
    CompressionOutput result = [&] {
      try {
        return compress(prompt, config, *scorer);
      } catch (const InvalidPromptError& e) {
        throw IoError("line " + std::to_string(records[n].line) + ": " + e.what());
      }
    }();
    lines[n] = {{"compressed", result.compressed.rendered()},
                {"report", result.report.to_json()},
                {"origin_map", origin_map_to_json(result.compressed.origin_map())}};
    reports[n] = std::move(result.report);
  });

  Output sink(o.out, out);
  for (const json& line : lines) sink.get() << line.dump() << '\n';
  if (!sink.get()) throw IoError("write failed");

  if (!g.quiet) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t n = 0; n < reports.size(); ++n) {
      const auto& r = reports[n];
      rows.push_back({std::to_string(records[n].line), std::to_string(r.original_tokens),
                      std::to_string(r.target_tokens), std::to_string(r.compressed_tokens),
                      fixed(r.ratio, 2), fixed(r.elapsed_ms, 1)});
      for (const auto& w : r.warnings) err << "line " << records[n].line << ": warning: " << w << '\n';
    }
    err << format_table({"line", "original", "target", "compressed", "1/tau", "ms"}, rows);
  }
  return kExitOk;
}

// rank -----------------------------------------------------------------------

struct RankOptions {
  std::string in;
  std::string out;
  std::size_t synthetic = 0;
};

int cmd_rank(const GlobalOptions& g, const RankOptions& o, std::ostream& out, std::ostream& err) {
  const PipelineConfig config = load_config(g);
  std::vector<NumberedRecord> records;
  if (o.synthetic > 0) {
    std::size_t line = 0;
    for (auto& r : synthetic_dataset(g.seed, o.synthetic)) records.push_back({++line, std::move(r)});
  } else if (!o.in.empty()) {
    records = read_records(o.in);
  } else {
    throw ConfigError("rank needs --in or --synthetic");
  }
  std::vector<PromptRecord> plain;
  for (const auto& r : records) plain.push_back(r.record);
  const auto scorer = make_scorer(config.scorer, config.scheme, corpus_texts(plain));

  std::vector<std::vector<double>> importances(records.size());
  std::vector<std::vector<std::size_t>> rankings(records.size());
  std::vector<std::vector<std::size_t>> bm25_rankings(records.size());
  std::vector<std::optional<std::size_t>> gold(records.size());
  parallel_for(records.size(), g.jobs, [&](std::size_t n) {
    const StructuredPrompt prompt = build_prompt(records[n], config);
    if (prompt.question.empty()) {
      throw IoError("line " + std::to_string(records[n].line) + ": empty question");
    }
    importances[n] = document_importances(prompt, *scorer);
    rankings[n] = rank_by(importances[n]);
    std::vector<std::vector<std::string>> docs;
    for (const auto& d : prompt.documents) docs.push_back(d.tokens());
    bm25_rankings[n] = rank_by(bm25_scores(prompt.question.tokens(), docs));
    gold[n] = records[n].record.gold_doc_index;
    if (gold[n] && *gold[n] >= prompt.documents.size()) gold[n].reset();
  });

  Output sink(o.out, out);
  for (std::size_t n = 0; n < records.size(); ++n) {
    sink.get() << json{{"line", records[n].line},
                       {"importances", importances[n]},
                       {"ranking", rankings[n]},
                       {"gold_doc_index", gold[n] ? json(*gold[n]) : json(nullptr)}}
                      .dump()
               << '\n';
  }
  const RecallStats ours = recall_at(rankings, gold);
  const RecallStats bm25 = recall_at(bm25_rankings, gold);
  json summary = {{"records", records.size()}};
  if (ours.evaluated == 0) {
    err << "warning: no record has a gold_doc_index; recall omitted\n";
  } else {
    summary["recall"] = ours.to_json();
    summary["bm25_recall"] = bm25.to_json();
    if (ours.skipped > 0) {
      err << "warning: " << ours.skipped << " records without gold_doc_index skipped for recall\n";
    }
  }
  sink.get() << json{{"summary", summary}}.dump() << '\n';
  if (!sink.get()) throw IoError("write failed");

  if (!g.quiet && ours.evaluated > 0) {
    std::vector<std::vector<std::string>> rows;
    for (const auto* stats : {&ours, &bm25}) {
      std::vector<std::string> row{stats == &ours ? scorer->model_id() : "bm25",
                                   std::to_string(stats->evaluated)};
      for (double v : stats->recall) row.push_back(fixed(v, 3));
      rows.push_back(row);
    }
    err << format_table({"ranker", "n", "recall@1", "recall@5", "recall@10"}, rows);
  }
  return kExitOk;
}

// recover --------------------------------------------------------------------

struct RecoverOptions {
  std::string original;
  std::string compressed;
  std::string response;
  std::size_t min_match = 1;
  std::string window = "provenance";
};

std::optional<json> json_head(const std::string& content) {
  const auto start = content.find_first_not_of(" \t\r\n");
  if (start == std::string::npos || content[start] != '{') return std::nullopt;
  const auto end = content.find('\n', start);
  try {
    return json::parse(content.substr(start, end == std::string::npos ? end : end - start));
  } catch (const json::exception&) {
    return json::parse(content.substr(start));
  }
}

std::string record_text(const StructuredPrompt& p) {
  std::string text = p.instruction.text();
  for (const auto& d : p.documents) text += "\n" + d.text();
  return text + "\n" + p.question.text();
}

int cmd_recover(const GlobalOptions& g, const RecoverOptions& o, std::ostream& out,
                std::ostream& err) {
  const PipelineConfig config = load_config(g);
  const std::string original_raw = read_file(o.original);
  const std::string compressed_raw = read_file(o.compressed);
  std::string response_raw = read_file(o.response);

  std::optional<json> original_json;
  std::optional<json> compressed_json;
  try {
    original_json = json_head(original_raw);
    compressed_json = json_head(compressed_raw);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed JSON input: ") + e.what());
  }

  RecoveryIndex index;
  if (original_json && compressed_json && compressed_json->contains("origin_map")) {
    const StructuredPrompt prompt = [&] {
      try {
        return StructuredPrompt::build(parse_prompt_record(*original_json), config.scheme,
                                       config.restrict_text);
      } catch (const InvalidPromptError& e) {
        throw IoError(o.original + ": " + e.what());
      }
    }();
    std::vector<RetainedSection> sections;
    try {
      for (const TokenOrigin& origin : origin_map_from_json(compressed_json->at("origin_map"))) {
        if (sections.empty() || sections.back().source_id != origin.source_id) {
          sections.push_back({origin.source_id, {}});
        }
        sections.back().indices.push_back(origin.index);
      }
    } catch (const std::exception& e) {
      throw IoError(o.compressed + ": bad origin_map: " + e.what());
    }
    const CompressedPrompt cp = [&] {
      try {
        return CompressedPrompt(prompt, std::move(sections));
      } catch (const InvalidPromptError& e) {
        throw IoError(o.compressed + ": " + e.what());
      }
    }();
    if (compressed_json->contains("compressed") &&
        compressed_json->at("compressed") != cp.rendered()) {
      err << "warning: compressed text differs from its origin map; using the origin map\n";
    }
    index = RecoveryIndex::build(prompt, cp);
  } else {
    std::string original_text = original_raw;
    if (original_json) {
      try {
        original_text = record_text(StructuredPrompt::build(parse_prompt_record(*original_json),
                                                            config.scheme, config.restrict_text));
      } catch (const InvalidPromptError& e) {
        throw IoError(o.original + ": " + e.what());
      }
    }
    std::string compressed_text = compressed_raw;
    if (compressed_json) {
      if (!compressed_json->contains("compressed") || !compressed_json->at("compressed").is_string()) {
        throw IoError(o.compressed + ": expected a \"compressed\" string field");
      }
      compressed_text = compressed_json->at("compressed").get<std::string>();
    }
    index = RecoveryIndex::build(tokenize(original_text, config.scheme),
                                 tokenize(compressed_text, config.scheme));
  }

  RecoveryOptions ropts;
  ropts.min_match = o.min_match;
  ropts.strategy =
      o.window == "shortest" ? WindowStrategy::kShortestWindow : WindowStrategy::kProvenance;
  const TokenSequence recovered =
      recover(tokenize(std::move(response_raw), config.scheme), index, ropts);
  out << recovered.text();
  if (!out) throw IoError("write failed");
  return kExitOk;
}

// bench ----------------------------------------------------------------------

struct BenchOptions {
  std::vector<std::size_t> positions{1, 5, 10, 15, 20};
  std::vector<double> ratios{2.0, 4.0};
  std::size_t instances = 100;
  std::size_t docs = 20;
  std::optional<std::size_t> total_tokens;
  std::string llm_url;
  std::string llm_model = "default";
  std::string out;
};

int cmd_bench(const GlobalOptions& g, const BenchOptions& o, std::ostream& out, std::ostream& err) {
  SweepConfig sweep;
  sweep.pipeline = load_config(g);
  if (sweep.pipeline.scorer.kind != "builtin") {
    err << "warning: bench always scores with the builtin scorer\n";
  }
  sweep.positions = o.positions;
  sweep.ratios = o.ratios;
  sweep.instances = o.instances;
  sweep.seed = g.seed;
  sweep.jobs = g.jobs;
  sweep.synthetic.num_docs = o.docs;
  sweep.synthetic.total_tokens = o.total_tokens;
  if (!o.llm_url.empty()) sweep.llm = LlmEndpoint{o.llm_url, o.llm_model};

  const SweepReport report = [&] {
    try {
      return run_position_sweep(sweep);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }();
  Output sink(o.out, out);
  sink.get() << report.to_json().dump(2) << '\n';
  if (!sink.get()) throw IoError("write failed");
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  if (!g.quiet) err << report.table();
  return kExitOk;
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UnknownSchemeError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InfeasibleBudgetError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ScorerError& e) {
    err << "scorer error: " << e.what() << '\n';
    return kExitScorer;
  } catch (const IoError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitIo;
  } catch (const InvalidPromptError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitIo;
  } catch (const RecoveryError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Question-aware prompt compression", "squeeze"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer(
      "Exit codes: 0 ok, 1 config error, 2 I/O or malformed input, 3 scorer failure.\n"
      "The http scorer reads its API key from $SQUEEZE_API_KEY.");

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Pipeline config (JSON)");
  app.add_option("--scorer", g.scorer, "builtin, http, or a scorer settings JSON file");
  app.add_option("--seed", g.seed, "Seed for synthetic data");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g.quiet, "Skip the human-readable table on stderr");

  CompressOptions co;
  auto* compress_cmd = app.add_subcommand("compress", "Compress prompts from a JSONL file");
  compress_cmd->add_option("--in", co.in, "Input JSONL")->required();
  compress_cmd->add_option("--out", co.out, "Output JSONL (default stdout)");
  auto* target_opt = compress_cmd->add_option("--target-tokens", co.target_tokens, "Token budget");
  compress_cmd->add_option("--ratio", co.ratio, "Compression ratio 1/tau")->excludes(target_opt);
  compress_cmd->add_option("--reorder", co.reorder, "Reorder documents by importance")
      ->check(CLI::IsMember({"on", "off"}));
  compress_cmd->add_option("--segment-size", co.segment_size, "Tokens per fine-compression segment");

  RankOptions ro;
  auto* rank_cmd = app.add_subcommand("rank", "Score documents and report recall@{1,5,10}");
  rank_cmd->add_option("--in", ro.in, "Input JSONL");
  rank_cmd->add_option("--out", ro.out, "Output JSONL (default stdout)");
  rank_cmd->add_option("--synthetic", ro.synthetic, "Rank N seeded synthetic instances instead");

  RecoverOptions rco;
  auto* recover_cmd = app.add_subcommand("recover", "Restore compressed fragments in a response");
  recover_cmd->add_option("--original", rco.original, "Original prompt (JSON record or text)")
      ->required();
  recover_cmd->add_option("--compressed", rco.compressed, "Compress output line or text")
      ->required();
  recover_cmd->add_option("--response", rco.response, "LLM response text")->required();
  recover_cmd->add_option("--min-match", rco.min_match, "Shortest run worth replacing");
  recover_cmd->add_option("--window", rco.window, "provenance or shortest")
      ->check(CLI::IsMember({"provenance", "shortest"}));

  BenchOptions bo;
  auto* bench_cmd = app.add_subcommand("bench", "Position-bias sweep on synthetic data");
  bench_cmd->add_option("--positions", bo.positions, "1-based gold positions")->delimiter(',');
  bench_cmd->add_option("--ratios", bo.ratios, "Compression ratios")->delimiter(',');
  bench_cmd->add_option("--instances", bo.instances, "Instances per cell");
  bench_cmd->add_option("--docs", bo.docs, "Documents per instance");
  bench_cmd->add_option("--total-tokens", bo.total_tokens, "Exact prompt size");
  bench_cmd->add_option("--llm-url", bo.llm_url, "OpenAI-compatible endpoint for accuracy");
  bench_cmd->add_option("--llm-model", bo.llm_model, "Model name sent to the endpoint");
  bench_cmd->add_option("--out", bo.out, "JSON report (default stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  }

  return guarded(err, [&] {
    if (*compress_cmd) return cmd_compress(g, co, out, err);
    if (*rank_cmd) return cmd_rank(g, ro, out, err);
    if (*recover_cmd) return cmd_recover(g, rco, out, err);
    return cmd_bench(g, bo, out, err);
  });
}

}  // namespace squeeze
