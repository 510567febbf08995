#include "streamrag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace streamrag::metrics {

double nearest_rank(std::vector<double> values, double pct) {
  if (values.empty()) throw std::invalid_argument("nearest_rank: no values");
  if (!(pct > 0.0 && pct <= 100.0)) throw std::invalid_argument("nearest_rank: pct must be in (0, 100]");
  std::sort(values.begin(), values.end());
  // Guard against 0.9 * 10 landing just above 9.
  const double rank = std::ceil(pct / 100.0 * static_cast<double>(values.size()) - 1e-9);
  const auto idx = static_cast<std::size_t>(std::max(1.0, rank)) - 1;
  return values[std::min(idx, values.size() - 1)];
}

std::string_view to_string(Stat s) {
  switch (s) {
    case Stat::p50: return "P50";
    case Stat::p90: return "P90";
    case Stat::mean: return "mean";
  }
  return "?";
}

const LatencyRow& LatencyTable::at(Strategy strategy, Stat stat) const {
  for (const auto& r : rows) {
    if (r.strategy == strategy && r.stat == stat) return r;
  }
  throw std::out_of_range("no latency row for " + std::string(to_string(strategy)) + " " +
                          std::string(to_string(stat)));
}

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stat_of(const std::vector<double>& v, Stat s) {
  switch (s) {
    case Stat::p50: return nearest_rank(v, 50);
    case Stat::p90: return nearest_rank(v, 90);
    case Stat::mean: return mean_of(v);
  }
  return 0;
}

}  // namespace

LatencyTable aggregate_latency(const std::vector<orch::SessionOutcome>& outcomes) {
  struct Columns {
    std::vector<double> qg, tr, rg, ft, lt;
  };
  std::map<Strategy, Columns> by_strategy;
  for (const auto& o : outcomes) {
    if (!o.completed) continue;
    auto& c = by_strategy[o.strategy];
    c.qg.push_back(static_cast<double>(o.latency.query_gen_ms));
    c.tr.push_back(static_cast<double>(o.latency.tool_results_ms));
    c.rg.push_back(static_cast<double>(o.latency.response_gen_ms));
    c.ft.push_back(static_cast<double>(o.latency.first_token_ms));
    c.lt.push_back(static_cast<double>(o.latency.last_token_ms));
  }
  if (by_strategy.empty()) throw InputError("aggregate_latency: no completed sessions");
  LatencyTable t;
  for (const auto& [strategy, c] : by_strategy) {
    for (Stat s : {Stat::p50, Stat::p90, Stat::mean}) {
      t.rows.push_back(LatencyRow{strategy, s, c.qg.size(), stat_of(c.qg, s), stat_of(c.tr, s),
                                  stat_of(c.rg, s), stat_of(c.ft, s), stat_of(c.lt, s)});
    }
  }
  return t;
}

std::string_view to_string(SavingsBasis b) { return b == SavingsBasis::mean ? "mean" : "p50"; }

SavingsBasis savings_basis_from_string(std::string_view name) {
  if (name == "mean") return SavingsBasis::mean;
  if (name == "p50") return SavingsBasis::p50;
  throw InputError("unknown savings basis '" + std::string(name) + "' (valid: mean, p50)");
}

namespace {

std::map<std::string, const orch::SessionOutcome*> by_id(
    const std::vector<orch::SessionOutcome>& outcomes, const char* side) {
  std::map<std::string, const orch::SessionOutcome*> out;
  std::vector<std::string> dupes;
  for (const auto& o : outcomes) {
    if (!out.emplace(o.utterance_id, &o).second) dupes.push_back(o.utterance_id);
  }
  if (!dupes.empty()) {
    std::string list;
    for (const auto& d : dupes) list += (list.empty() ? "" : ", ") + d;
    throw InputError(std::string(side) + " outcomes repeat utterance ids: " + list);
  }
  return out;
}

}  // namespace

SavingsReport savings_report(const std::vector<orch::SessionOutcome>& baseline,
                             const std::vector<orch::SessionOutcome>& strategy,
                             SavingsBasis basis, std::optional<double> tool_use_base_ms) {
  const auto base = by_id(baseline, "baseline");
  const auto strat = by_id(strategy, "strategy");
  std::vector<std::string> unpaired;
  for (const auto& [id, o] : base) {
    if (!strat.contains(id)) unpaired.push_back(id + " (baseline only)");
  }
  for (const auto& [id, o] : strat) {
    if (!base.contains(id)) unpaired.push_back(id + " (strategy only)");
  }
  if (!unpaired.empty()) {
    std::string list;
    for (const auto& u : unpaired) list += (list.empty() ? "" : ", ") + u;
    throw InputError("unpaired utterances: " + list);
  }
  if (base.empty()) throw InputError("savings_report: no outcomes");

  SavingsReport r;
  r.basis = basis;
  r.pairs = base.size();
  std::vector<double> savings;
  std::vector<double> tool_use;
  std::size_t benefiting = 0;
  for (const auto& [id, b] : base) {
    const auto* s = strat.at(id);
    PairSaving p{id,
                 static_cast<double>(b->latency.tool_results_ms),
                 static_cast<double>(s->latency.tool_results_ms),
                 static_cast<double>(b->latency.first_token_ms),
                 static_cast<double>(s->latency.first_token_ms)};
    savings.push_back(p.saving_ms());
    tool_use.push_back(static_cast<double>(b->latency.query_gen_ms + b->latency.tool_results_ms));
    if (p.saving_ms() > 0) ++benefiting;
    r.per_pair.push_back(std::move(p));
    r.max_parallel_threads = std::max(r.max_parallel_threads, s->max_parallel_threads);
  }
  const double saved = basis == SavingsBasis::mean ? mean_of(savings) : nearest_rank(savings, 50);
  r.tool_use_latency_base_ms =
      tool_use_base_ms ? *tool_use_base_ms
                       : (basis == SavingsBasis::mean ? mean_of(tool_use) : nearest_rank(tool_use, 50));
  r.mean_savings_pct = r.tool_use_latency_base_ms > 0 ? saved / r.tool_use_latency_base_ms * 100.0 : 0.0;
  r.pct_queries_benefiting = static_cast<double>(benefiting) / static_cast<double>(r.pairs) * 100.0;
  return r;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::accurate: return "accurate";
    case Verdict::hallucinated: return "hallucinated";
    case Verdict::missing: return "missing";
  }
  return "?";
}

Verdict verdict_from_string(std::string_view name) {
  if (name == "accurate") return Verdict::accurate;
  if (name == "hallucinated") return Verdict::hallucinated;
  if (name == "missing") return Verdict::missing;
  throw InputError("unknown verdict '" + std::string(name) +
                   "' (valid: accurate, hallucinated, missing)");
}

Scores score_responses(const std::vector<Judgment>& judgments) {
  if (judgments.empty()) throw InputError("score_responses: no judgments");
  std::set<std::pair<std::string, std::string>> seen;
  Scores s;
  for (const auto& j : judgments) {
    if (!seen.emplace(j.system, j.utterance_id).second) {
      throw InputError("utterance '" + j.utterance_id + "' judged twice" +
                       (j.system.empty() ? std::string() : " for system '" + j.system + "'"));
    }
    switch (j.verdict) {
      case Verdict::accurate: ++s.accurate; break;
      case Verdict::hallucinated: ++s.hallucinated; break;
      case Verdict::missing: ++s.missing; break;
    }
  }
  s.judged = judgments.size();
  const double n = static_cast<double>(s.judged);
  s.accuracy_pct = static_cast<double>(s.accurate) / n * 100.0;
  s.hallucination_pct = static_cast<double>(s.hallucinated) / n * 100.0;
  s.missing_pct = static_cast<double>(s.missing) / n * 100.0;
  s.truthfulness_score = s.accuracy_pct - s.hallucination_pct;
  return s;
}

double round1(double v) { return std::round(v * 10.0) / 10.0; }

std::vector<Judgment> read_judgments(const std::filesystem::path& path) {
  std::vector<Judgment> out;
  io::for_each_jsonl(path, [&](const io::Json& j, std::size_t) {
    Judgment jd;
    jd.utterance_id = j.at("utterance_id").get<std::string>();
    jd.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    jd.system = j.value("system", std::string{});
    out.push_back(std::move(jd));
  });
  return out;
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

double seconds(double ms) { return std::round(ms) / 1000.0; }

}  // namespace

std::string latency_table_csv(const LatencyTable& t) {
  std::string out = "strategy,stat,sessions,query_gen_s,tool_results_s,response_gen_s,first_token_s,last_token_s\n";
  for (const auto& r : t.rows) {
    out += std::string(to_string(r.strategy)) + "," + std::string(to_string(r.stat)) + "," +
           std::to_string(r.sessions) + "," + fixed(r.query_gen_ms / 1000.0, 3) + "," +
           fixed(r.tool_results_ms / 1000.0, 3) + "," + fixed(r.response_gen_ms / 1000.0, 3) + "," +
           fixed(r.first_token_ms / 1000.0, 3) + "," + fixed(r.last_token_ms / 1000.0, 3) + "\n";
  }
  return out;
}

io::Json latency_table_json(const LatencyTable& t) {
  io::Json rows = io::Json::array();
  for (const auto& r : t.rows) {
    rows.push_back(io::Json{{"strategy", std::string(to_string(r.strategy))},
                            {"stat", std::string(to_string(r.stat))},
                            {"sessions", r.sessions},
                            {"query_gen_s", seconds(r.query_gen_ms)},
                            {"tool_results_s", seconds(r.tool_results_ms)},
                            {"response_gen_s", seconds(r.response_gen_ms)},
                            {"first_token_s", seconds(r.first_token_ms)},
                            {"last_token_s", seconds(r.last_token_ms)}});
  }
  return io::Json{{"schema_version", io::kSchemaVersion}, {"rows", std::move(rows)}};
}

std::string savings_csv(const SavingsReport& r) {
  return "basis,pairs,tool_use_latency_base_s,mean_savings_pct,pct_queries_benefiting,max_parallel_threads\n" +
         std::string(to_string(r.basis)) + "," + std::to_string(r.pairs) + "," +
         fixed(r.tool_use_latency_base_ms / 1000.0, 3) + "," + fixed(r.mean_savings_pct, 1) + "," +
         fixed(r.pct_queries_benefiting, 1) + "," + std::to_string(r.max_parallel_threads) + "\n";
}

std::string savings_pairs_csv(const SavingsReport& r) {
  std::string out =
      "utterance_id,baseline_tool_results_ms,strategy_tool_results_ms,baseline_first_token_ms,strategy_first_token_ms,saving_ms\n";
  for (const auto& p : r.per_pair) {
    out += p.utterance_id + "," + fixed(p.baseline_tool_results_ms, 0) + "," +
           fixed(p.strategy_tool_results_ms, 0) + "," + fixed(p.baseline_first_token_ms, 0) + "," +
           fixed(p.strategy_first_token_ms, 0) + "," + fixed(p.saving_ms(), 0) + "\n";
  }
  return out;
}

io::Json savings_json(const SavingsReport& r) {
  return io::Json{{"schema_version", io::kSchemaVersion},
                  {"basis", std::string(to_string(r.basis))},
                  {"pairs", r.pairs},
                  {"tool_use_latency_base_s", seconds(r.tool_use_latency_base_ms)},
                  {"mean_savings_pct", round1(r.mean_savings_pct)},
                  {"pct_queries_benefiting", round1(r.pct_queries_benefiting)},
                  {"max_parallel_threads", r.max_parallel_threads},
                  {"formula", r.basis == SavingsBasis::mean
                                  ? "mean(tool_results_base - tool_results_strategy) / mean(query_gen_base + tool_results_base)"
                                  : "p50(tool_results_base - tool_results_strategy) / p50(query_gen_base + tool_results_base)"}};
}

io::Json scores_json(const Scores& s) {
  return io::Json{{"schema_version", io::kSchemaVersion},
                  {"judged", s.judged},
                  {"accurate", s.accurate},
                  {"hallucinated", s.hallucinated},
                  {"missing", s.missing},
                  {"accuracy_pct", round1(s.accuracy_pct)},
                  {"hallucination_pct", round1(s.hallucination_pct)},
                  {"missing_pct", round1(s.missing_pct)},
                  {"truthfulness_score", round1(s.truthfulness_score)}};
}

}  // namespace streamrag::metrics
