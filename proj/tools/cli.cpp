#include "cli.hpp"

#include <cstdlib>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "manifest.hpp"
#include "streamrag/json_io.hpp"
#include "streamrag/labeling.hpp"
#include "streamrag/metrics.hpp"
#include "streamrag/orchestrator.hpp"

namespace streamrag::cli {

namespace fs = std::filesystem;

namespace {

std::optional<fs::path> config_path(const std::optional<fs::path>& flag) {
  if (flag) return flag;
  if (const char* env = std::getenv("STREAMRAG_CONFIG"); env != nullptr && *env != '\0') {
    return fs::path(env);
  }
  return std::nullopt;
}

Format format_from_string(const std::string& s) {
  if (s == "json") return Format::json;
  if (s == "csv") return Format::csv;
  if (s == "all") return Format::all;
  throw InputError("unknown format '" + s + "' (valid: json, csv, all)");
}

bool wants(Format f, Format kind) { return f == Format::all || f == kind; }

void write_output(RunManifest& m, const fs::path& dir, const std::string& name,
                  const std::string& content) {
  io::write_file_atomic(dir / name, content);
  m.add_output(dir, name);
}

std::string seconds(Millis ms) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2) << static_cast<double>(ms) / 1000.0;
  return ss.str();
}

std::string seconds(double ms) { return seconds(static_cast<Millis>(std::llround(ms))); }

}  // namespace

SessionConfig resolve_config(Strategy strategy, const std::optional<fs::path>& config_file,
                             const ConfigOverrides& o) {
  SessionConfig c = default_config(strategy);
  if (config_file) {
    io::Json j;
    try {
      j = io::Json::parse(io::read_file(*config_file));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(config_file->string() + ": " + e.what());
    }
    if (j.is_object()) j.erase("strategy");
    c = io::config_from_json(j, c);
  }
  if (o.block_ms) c.block_ms = *o.block_ms;
  if (o.ref_length_tokens) c.ref_length_tokens = *o.ref_length_tokens;
  if (o.ratio) c.web_kg_ratio = ratio_from_string(*o.ratio);
  if (o.top_docs) c.top_docs = *o.top_docs;
  if (o.reflect_top_k) c.reflect_top_k = *o.reflect_top_k;
  if (o.context_docs) c.context_docs = *o.context_docs;
  if (o.chunk_tokens) c.chunk_tokens = *o.chunk_tokens;
  if (o.reflect_set_equality) c.reflect_set_equality = *o.reflect_set_equality;
  if (o.negative_sample_prob) c.negative_sample_prob = *o.negative_sample_prob;
  if (o.seed) c.rng_seed = *o.seed;
  if (o.endpoint_delay_ms) c.endpoint_delay_ms = *o.endpoint_delay_ms;
  c.validate();
  return c;
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  const auto cfg_file = config_path(o.config);
  std::vector<Strategy> strategies;
  for (const auto& s : o.strategies) strategies.push_back(strategy_from_string(s));
  if (strategies.empty()) {
    std::optional<Strategy> from_file;
    if (cfg_file) {
      auto j = io::Json::parse(io::read_file(*cfg_file), nullptr, false);
      if (j.is_object() && j.contains("strategy") && j["strategy"].is_string()) {
        from_file = strategy_from_string(j["strategy"].get<std::string>());
      }
    }
    strategies.push_back(from_file.value_or(Strategy::open_book));
  }

  const auto traces = io::read_traces(o.traces);
  if (traces.empty()) throw InputError(o.traces.string() + ": no traces");
  const retrieval::DocIndex index(io::read_corpus(o.corpus));
  const auto kg = io::read_kg_store(o.kg);
  orch::LatencyModel latency;
  if (o.latency) {
    try {
      latency = orch::latency_model_from_json(io::Json::parse(io::read_file(*o.latency)));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(o.latency->string() + ": " + e.what());
    }
  }

  RunManifest manifest;
  manifest.command = "simulate";
  manifest.argv = o.argv;
  manifest.add_input(o.traces);
  manifest.add_input(o.corpus);
  manifest.add_input(o.kg);
  if (o.latency) manifest.add_input(*o.latency);
  if (cfg_file) manifest.add_input(*cfg_file);
  manifest.config = io::Json::object();
  manifest.config["latency"] = orch::latency_model_to_json(latency);
  manifest.config["jobs"] = o.jobs;

  fs::create_directories(o.out_dir);
  std::vector<orch::SessionOutcome> all;
  io::Json summary = io::Json::object();
  std::size_t failures = 0;
  for (Strategy strategy : strategies) {
    const auto config = resolve_config(strategy, cfg_file, o.overrides);
    manifest.seed = config.rng_seed;
    manifest.config["sessions"][std::string(to_string(strategy))] = io::config_to_json(config);

    const auto items = orch::run_batch(traces, config, {&index, &kg}, latency, o.jobs);
    std::vector<orch::SessionOutcome> outcomes;
    io::Json errors = io::Json::array();
    int spawned = 0, cancelled = 0, max_parallel = 0, degraded = 0;
    for (const auto& item : items) {
      if (!item.ok()) {
        ++failures;
        err << "warning: " << to_string(strategy) << " " << item.utterance_id << ": " << item.error
            << "\n";
        errors.push_back(io::Json{{"utterance_id", item.utterance_id}, {"error", item.error}});
        continue;
      }
      const auto& oc = *item.outcome;
      spawned += oc.threads_spawned;
      cancelled += oc.threads_cancelled;
      max_parallel = std::max(max_parallel, oc.max_parallel_threads);
      degraded += oc.degraded ? 1 : 0;
      outcomes.push_back(oc);
    }
    const std::string name(to_string(strategy));
    orch::write_outcomes(outcomes, o.out_dir / ("outcomes_" + name + ".jsonl"));
    manifest.add_output(o.out_dir, "outcomes_" + name + ".jsonl");
    orch::write_event_log(outcomes, o.out_dir / ("events_" + name + ".jsonl"));
    manifest.add_output(o.out_dir, "events_" + name + ".jsonl");
    summary[name] = io::Json{{"sessions", outcomes.size()},
                             {"errors", std::move(errors)},
                             {"block_ms", config.block_ms},
                             {"threads_spawned", spawned},
                             {"threads_cancelled", cancelled},
                             {"max_parallel_threads", max_parallel},
                             {"degraded", degraded}};
    all.insert(all.end(), outcomes.begin(), outcomes.end());
  }
  if (all.empty()) throw InputError("every session failed; see warnings above");

  const auto table = metrics::aggregate_latency(all);
  if (wants(o.format, Format::csv)) {
    write_output(manifest, o.out_dir, "latency.csv", metrics::latency_table_csv(table));
  }
  if (wants(o.format, Format::json)) {
    auto j = metrics::latency_table_json(table);
    j["strategies"] = summary;
    write_output(manifest, o.out_dir, "latency.json", j.dump(2) + "\n");
  }
  write_manifest(manifest, o.out_dir);

  out << "strategy          stat   query_gen  tool_results  response_gen  first_token\n";
  for (const auto& r : table.rows) {
    out << std::left << std::setw(18) << to_string(r.strategy) << std::setw(7) << to_string(r.stat)
        << std::right << std::setw(9) << seconds(r.query_gen_ms) << std::setw(14)
        << seconds(r.tool_results_ms) << std::setw(14) << seconds(r.response_gen_ms)
        << std::setw(13) << seconds(r.first_token_ms) << "\n";
  }
  for (const auto& [name, s] : summary.items()) {
    out << name << ": sessions=" << s["sessions"].get<std::size_t>()
        << " threads_spawned=" << s["threads_spawned"].get<int>()
        << " threads_cancelled=" << s["threads_cancelled"].get<int>()
        << " max_parallel_threads=" << s["max_parallel_threads"].get<int>()
        << " degraded=" << s["degraded"].get<int>() << "\n";
  }
  if (failures > 0) out << failures << " session(s) failed; see latency.json\n";
  out << "wrote " << o.out_dir.string() << "\n";
  return kOk;
}

namespace {

std::string label_cell(const labeling::LabeledStep& s) {
  std::string text = s.label.describe();
  if (s.is_negative_sample) text += " [neg]";
  return text;
}

}  // namespace

int cmd_label(const LabelOptions& o, std::ostream& out, std::ostream&) {
  const auto cfg_file = config_path(o.config);
  const auto config = resolve_config(Strategy::model_triggered, cfg_file, o.overrides);
  const auto traces = io::read_traces(o.traces);
  const retrieval::DocIndex index(io::read_corpus(o.corpus));

  std::map<std::string, labeling::PseudoGt> pgt;
  if (o.pseudo_gt) {
    pgt = labeling::read_pseudo_gt(*o.pseudo_gt);
    std::set<std::string> trace_ids;
    for (const auto& t : traces) trace_ids.insert(t.utterance_id);
    std::vector<std::string> problems;
    for (const auto& [id, g] : pgt) {
      if (!trace_ids.contains(id)) problems.push_back(id + " (pseudo-GT only)");
    }
    for (const auto& id : trace_ids) {
      if (!pgt.contains(id)) problems.push_back(id + " (trace only)");
    }
    if (!problems.empty()) {
      std::string list;
      for (const auto& p : problems) list += (list.empty() ? "" : ", ") + p;
      throw InputError("traces and pseudo-GT do not align: " + list);
    }
  }

  labeling::SimilarityContext ctx{&index, config.top_docs, config.reflect_top_k, true};
  const auto steps = labeling::label_batch(traces, pgt, config.block_ms, ctx,
                                           config.negative_sample_prob, config.rng_seed);
  const auto summary = labeling::summarize(steps);

  RunManifest manifest;
  manifest.command = "label";
  manifest.argv = o.argv;
  manifest.seed = config.rng_seed;
  manifest.config = io::config_to_json(config);
  manifest.add_input(o.traces);
  manifest.add_input(o.corpus);
  if (o.pseudo_gt) manifest.add_input(*o.pseudo_gt);
  if (cfg_file) manifest.add_input(*cfg_file);

  fs::create_directories(o.out_dir);
  labeling::export_training_set(steps, o.out_dir / "training.jsonl");
  manifest.add_output(o.out_dir, "training.jsonl");
  const io::Json sj{{"schema_version", io::kSchemaVersion},
                    {"steps", summary.steps},
                    {"fires", summary.fires},
                    {"no_query", summary.no_query},
                    {"negatives", summary.negatives}};
  write_output(manifest, o.out_dir, "label_summary.json", sj.dump(2) + "\n");
  write_manifest(manifest, o.out_dir);

  if (o.print_table) {
    std::string current;
    for (std::size_t i = 0; i < steps.size(); i += 2) {
      const auto& web = steps[i];
      if (web.utterance_id != current) {
        current = web.utterance_id;
        out << "== " << current << "\n";
      }
      const auto* kg = i + 1 < steps.size() ? &steps[i + 1] : nullptr;
      out << std::setw(3) << web.block.value << " | " << web.prefix << " | " << label_cell(web)
          << " | " << (kg ? label_cell(*kg) : std::string("-")) << "\n";
    }
  }
  out << "steps=" << summary.steps << " fires=" << summary.fires
      << " no_query=" << summary.no_query << " negatives=" << summary.negatives << "\n";
  out << "wrote " << o.out_dir.string() << "\n";
  return kOk;
}

int cmd_report(const ReportOptions& o, std::ostream& out, std::ostream&) {
  const auto baseline = orch::read_outcomes(o.baseline);
  const auto strategy = orch::read_outcomes(o.strategy);

  std::vector<metrics::SavingsBasis> bases;
  if (o.basis == "both") {
    bases = {metrics::SavingsBasis::mean, metrics::SavingsBasis::p50};
  } else {
    bases = {metrics::savings_basis_from_string(o.basis)};
  }

  RunManifest manifest;
  manifest.command = "report";
  manifest.argv = o.argv;
  manifest.config = io::Json{{"basis", o.basis}};
  if (o.tool_use_base_ms) manifest.config["tool_use_base_ms"] = *o.tool_use_base_ms;
  manifest.add_input(o.baseline);
  manifest.add_input(o.strategy);

  std::vector<metrics::SavingsReport> reports;
  for (auto b : bases) reports.push_back(metrics::savings_report(baseline, strategy, b, o.tool_use_base_ms));

  fs::create_directories(o.out_dir);
  if (wants(o.format, Format::csv)) {
    std::string csv;
    for (std::size_t i = 0; i < reports.size(); ++i) {
      auto part = metrics::savings_csv(reports[i]);
      csv += i == 0 ? part : part.substr(part.find('\n') + 1);
    }
    write_output(manifest, o.out_dir, "savings.csv", csv);
    write_output(manifest, o.out_dir, "savings_pairs.csv", metrics::savings_pairs_csv(reports.front()));
  }
  if (wants(o.format, Format::json)) {
    io::Json j = io::Json::object();
    for (const auto& r : reports) j[std::string(metrics::to_string(r.basis))] = metrics::savings_json(r);
    write_output(manifest, o.out_dir, "savings.json", j.dump(2) + "\n");
  }
  for (const auto& r : reports) {
    out << "savings (" << metrics::to_string(r.basis) << "): " << std::fixed << std::setprecision(1)
        << r.mean_savings_pct << "% of " << seconds(r.tool_use_latency_base_ms)
        << " s tool-use latency; " << r.pct_queries_benefiting << "% of " << r.pairs
        << " queries benefit; max parallel threads " << r.max_parallel_threads << "\n";
  }

  if (o.judgments) {
    manifest.add_input(*o.judgments);
    const auto judgments = metrics::read_judgments(*o.judgments);
    std::map<std::string, std::vector<metrics::Judgment>> by_system;
    for (const auto& j : judgments) by_system[j.system].push_back(j);
    io::Json systems = io::Json::array();
    std::string csv = "system,judged,accuracy_pct,hallucination_pct,missing_pct,truthfulness_score\n";
    for (const auto& [system, list] : by_system) {
      const auto s = metrics::score_responses(list);
      auto sj = metrics::scores_json(s);
      sj["system"] = system;
      systems.push_back(sj);
      std::ostringstream row;
      row << std::fixed << std::setprecision(1) << system << "," << s.judged << ","
          << metrics::round1(s.accuracy_pct) << "," << metrics::round1(s.hallucination_pct) << ","
          << metrics::round1(s.missing_pct) << "," << metrics::round1(s.truthfulness_score) << "\n";
      csv += row.str();
      out << "score " << (system.empty() ? "(all)" : system) << ": " << row.str().substr(system.size() + 1);
    }
    if (wants(o.format, Format::json)) {
      write_output(manifest, o.out_dir, "scores.json",
                   io::Json{{"schema_version", io::kSchemaVersion}, {"systems", systems}}.dump(2) + "\n");
    }
    if (wants(o.format, Format::csv)) write_output(manifest, o.out_dir, "scores.csv", csv);
  } else {
    out << "no judgments given; scores skipped\n";
  }
  write_manifest(manifest, o.out_dir);
  out << "wrote " << o.out_dir.string() << "\n";
  return kOk;
}

int cmd_rerun(const fs::path& manifest_path, const std::optional<fs::path>& out_dir,
              std::ostream& out, std::ostream& err) {
  const auto m = read_manifest(manifest_path);
  auto args = m.argv;
  fs::path target = "out";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out-dir" && i + 1 < args.size()) {
      if (out_dir) args[i + 1] = out_dir->string();
      target = args[i + 1];
    }
  }
  if (out_dir && std::find(args.begin(), args.end(), "--out-dir") == args.end()) {
    args.push_back("--out-dir");
    args.push_back(out_dir->string());
    target = *out_dir;
  }
  std::ostringstream sink;
  const int code = run(args, sink, err);
  if (code != kOk) return code;

  int mismatches = 0;
  for (const auto& f : m.outputs) {
    const auto now = sha256_file(target / f.path);
    const bool same = now == f.sha256;
    mismatches += same ? 0 : 1;
    out << (same ? "same    " : "differs ") << f.path << "\n";
  }
  out << (mismatches == 0 ? "reproduced" : "NOT reproduced") << " (" << m.outputs.size()
      << " outputs)\n";
  return mismatches == 0 ? kOk : kNotReproduced;
}

namespace {

template <typename T>
void set_if(CLI::Option* opt, const T& value, std::optional<T>& target) {
  if (opt->count() > 0) target = value;
}

struct OverrideFlags {
  Millis block_ms = 0;
  std::int64_t ref_length = 0;
  std::string ratio;
  int top_docs = 0, top_k = 0, context_docs = 0, chunk_tokens = 0;
  bool set_equality = false;
  double negative_prob = 0;
  std::uint64_t seed = 0;
  Millis endpoint_delay = 0;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app, bool with_negative_prob) {
    opts["block"] = app->add_option("--block-ms", block_ms, "Block length in ms");
    opts["ref"] = app->add_option("--ref-length", ref_length, "Reference budget in tokens");
    opts["ratio"] = app->add_option("--ratio", ratio, "Web:KG share of the budget, e.g. 2:1");
    opts["top_docs"] = app->add_option("--top-docs", top_docs, "Documents retrieved per web query");
    opts["top_k"] = app->add_option("--reflect-top-k", top_k, "Documents compared by the reflector");
    opts["context"] = app->add_option("--context-docs", context_docs, "Ranked documents chunked into the context");
    opts["chunk"] = app->add_option("--chunk-tokens", chunk_tokens, "Tokens per chunk");
    opts["set_eq"] = app->add_flag("--reflect-set-equality", set_equality,
                                   "Compare top documents as sets when reflecting");
    if (with_negative_prob) {
      opts["neg"] = app->add_option("--negative-prob", negative_prob, "Negative-sample probability");
    }
    opts["seed"] = app->add_option("--seed", seed, "RNG seed");
    opts["endpoint"] = app->add_option("--endpoint-delay-ms", endpoint_delay, "Endpoint-detection lag");
  }

  ConfigOverrides collect() const {
    ConfigOverrides o;
    set_if(opts.at("block"), block_ms, o.block_ms);
    set_if(opts.at("ref"), ref_length, o.ref_length_tokens);
    set_if(opts.at("ratio"), ratio, o.ratio);
    set_if(opts.at("top_docs"), top_docs, o.top_docs);
    set_if(opts.at("top_k"), top_k, o.reflect_top_k);
    set_if(opts.at("context"), context_docs, o.context_docs);
    set_if(opts.at("chunk"), chunk_tokens, o.chunk_tokens);
    set_if(opts.at("set_eq"), set_equality, o.reflect_set_equality);
    if (opts.contains("neg")) set_if(opts.at("neg"), negative_prob, o.negative_sample_prob);
    set_if(opts.at("seed"), seed, o.seed);
    set_if(opts.at("endpoint"), endpoint_delay, o.endpoint_delay_ms);
    return o;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Streaming RAG session simulator"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  SimulateOptions sim;
  std::string sim_format = "all";
  std::string sim_latency, sim_config;
  OverrideFlags sim_flags;
  auto* s = app.add_subcommand("simulate", "Run sessions over a trace file");
  s->add_option("--traces", sim.traces, "Trace JSONL")->required();
  s->add_option("--corpus", sim.corpus, "Corpus JSONL")->required();
  s->add_option("--kg", sim.kg, "KG fixture JSON")->required();
  auto* sim_latency_opt = s->add_option("--latency", sim_latency, "Latency model JSON");
  auto* sim_config_opt = s->add_option("--config", sim_config, "Config JSON (default: $STREAMRAG_CONFIG)");
  s->add_option("--strategy", sim.strategies,
                "closed_book, open_book, fixed_interval or model_triggered; repeatable")
      ->delimiter(',');
  s->add_option("--jobs", sim.jobs, "Concurrent sessions")->check(CLI::PositiveNumber);
  s->add_option("--out-dir", sim.out_dir, "Output directory");
  s->add_option("--format", sim_format, "json, csv or all");
  sim_flags.add(s, false);

  LabelOptions lab;
  std::string lab_pgt, lab_config;
  OverrideFlags lab_flags;
  auto* l = app.add_subcommand("label", "Build streaming training labels");
  l->add_option("--traces", lab.traces, "Trace JSONL")->required();
  auto* lab_pgt_opt = l->add_option("--pseudo-gt", lab_pgt, "Pseudo-GT JSONL keyed by utterance and block");
  l->add_option("--corpus", lab.corpus, "Corpus JSONL for web similarity")->required();
  auto* lab_config_opt = l->add_option("--config", lab_config, "Config JSON (default: $STREAMRAG_CONFIG)");
  l->add_flag("--print-table", lab.print_table, "Print per-block labels");
  l->add_option("--out-dir", lab.out_dir, "Output directory");
  lab_flags.add(l, true);

  ReportOptions rep;
  std::string rep_format = "all";
  std::string rep_judgments;
  double rep_base = 0;
  auto* r = app.add_subcommand("report", "Savings and truthfulness reports");
  r->add_option("--baseline", rep.baseline, "Baseline outcomes JSONL")->required();
  r->add_option("--strategy", rep.strategy, "Strategy outcomes JSONL")->required();
  auto* rep_j_opt = r->add_option("--judgments", rep_judgments, "Judgments JSONL");
  r->add_option("--basis", rep.basis, "mean, p50 or both");
  auto* rep_base_opt = r->add_option("--tool-use-base-ms", rep_base, "Fixed savings denominator");
  r->add_option("--out-dir", rep.out_dir, "Output directory");
  r->add_option("--format", rep_format, "json, csv or all");

  std::string rerun_manifest, rerun_out;
  auto* rr = app.add_subcommand("rerun", "Repeat a recorded run and compare digests");
  rr->add_option("manifest", rerun_manifest, "manifest.json of a previous run")->required();
  auto* rerun_out_opt = rr->add_option("--out-dir", rerun_out, "Write outputs here instead");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::ostringstream o2, e2;
    const int code = app.exit(e, o2, e2);
    out << o2.str();
    err << e2.str();
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (s->parsed()) {
      sim.argv = args;
      sim.format = format_from_string(sim_format);
      if (sim_latency_opt->count() > 0) sim.latency = sim_latency;
      if (sim_config_opt->count() > 0) sim.config = sim_config;
      sim.overrides = sim_flags.collect();
      return cmd_simulate(sim, out, err);
    }
    if (l->parsed()) {
      lab.argv = args;
      if (lab_pgt_opt->count() > 0) lab.pseudo_gt = lab_pgt;
      if (lab_config_opt->count() > 0) lab.config = lab_config;
      lab.overrides = lab_flags.collect();
      return cmd_label(lab, out, err);
    }
    if (r->parsed()) {
      rep.argv = args;
      rep.format = format_from_string(rep_format);
      if (rep_j_opt->count() > 0) rep.judgments = rep_judgments;
      if (rep_base_opt->count() > 0) rep.tool_use_base_ms = rep_base;
      return cmd_report(rep, out, err);
    }
    if (rr->parsed()) {
      std::optional<fs::path> dir;
      if (rerun_out_opt->count() > 0) dir = rerun_out;
      return cmd_rerun(rerun_manifest, dir, out, err);
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kInternalError;
}

}  // namespace streamrag::cli
