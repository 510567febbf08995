#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "streamrag/json_io.hpp"
#include "streamrag/orchestrator.hpp"

namespace streamrag::metrics {

/// Nearest-rank percentile: the ceil(pct/100 * n)-th smallest value.
/// Throws std::invalid_argument on empty input or pct outside (0, 100].
double nearest_rank(std::vector<double> values, double pct);

enum class Stat { p50, p90, mean };

std::string_view to_string(Stat s);

/// One row of a latency table, in milliseconds.
struct LatencyRow {
  Strategy strategy = Strategy::open_book;
  Stat stat = Stat::p50;
  std::size_t sessions = 0;
  double query_gen_ms = 0;
  double tool_results_ms = 0;
  double response_gen_ms = 0;
  double first_token_ms = 0;
  double last_token_ms = 0;

  friend bool operator==(const LatencyRow&, const LatencyRow&) = default;
};

struct LatencyTable {
  /// Ordered by strategy, then P50, P90, mean.
  std::vector<LatencyRow> rows;

  /// Throws std::out_of_range when the strategy is absent.
  const LatencyRow& at(Strategy strategy, Stat stat) const;
};

/// Per-strategy statistics, each column computed independently. Incomplete
/// sessions are skipped. Throws InputError when nothing is left.
LatencyTable aggregate_latency(const std::vector<orch::SessionOutcome>& outcomes);

enum class SavingsBasis { mean, p50 };

std::string_view to_string(SavingsBasis b);
SavingsBasis savings_basis_from_string(std::string_view name);

struct PairSaving {
  std::string utterance_id;
  double baseline_tool_results_ms = 0;
  double strategy_tool_results_ms = 0;
  double baseline_first_token_ms = 0;
  double strategy_first_token_ms = 0;

  double saving_ms() const { return baseline_tool_results_ms - strategy_tool_results_ms; }
};

struct SavingsReport {
  SavingsBasis basis = SavingsBasis::mean;
  std::size_t pairs = 0;
  /// Baseline tool-use latency (query generation plus tool results) the
  /// savings are expressed against.
  double tool_use_latency_base_ms = 0;
  double mean_savings_pct = 0;
  double pct_queries_benefiting = 0;
  int max_parallel_threads = 0;
  std::vector<PairSaving> per_pair;
};

/// Pairs outcomes by utterance_id. With basis mean, savings are the mean
/// per-pair tool-result saving over the baseline's mean tool-use latency;
/// with p50, the median saving over the median tool-use latency. An explicit
/// `tool_use_base_ms` replaces the measured denominator. Throws InputError
/// listing unpaired or duplicated ids.
SavingsReport savings_report(const std::vector<orch::SessionOutcome>& baseline,
                             const std::vector<orch::SessionOutcome>& strategy,
                             SavingsBasis basis,
                             std::optional<double> tool_use_base_ms = std::nullopt);

enum class Verdict { accurate, hallucinated, missing };

std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view name);

struct Judgment {
  std::string utterance_id;
  Verdict verdict = Verdict::missing;
  std::string system;
};

struct Scores {
  std::size_t judged = 0;
  std::size_t accurate = 0;
  std::size_t hallucinated = 0;
  std::size_t missing = 0;
  double accuracy_pct = 0;
  double hallucination_pct = 0;
  double missing_pct = 0;
  /// accuracy_pct - hallucination_pct: verdicts weighted 1, -1, 0.
  double truthfulness_score = 0;
};

/// Throws InputError on empty input or when one system judges an utterance
/// twice.
Scores score_responses(const std::vector<Judgment>& judgments);

/// Rounds half away from zero to one decimal, as reported in tables.
double round1(double v);

/// JSONL of {utterance_id, verdict, system?}.
std::vector<Judgment> read_judgments(const std::filesystem::path& path);

std::string latency_table_csv(const LatencyTable& t);
io::Json latency_table_json(const LatencyTable& t);
std::string savings_csv(const SavingsReport& r);
/// utterance_id, per-pair latencies and saving; for plotting.
std::string savings_pairs_csv(const SavingsReport& r);
io::Json savings_json(const SavingsReport& r);
io::Json scores_json(const Scores& s);

}  // namespace streamrag::metrics
