#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "streamrag/config.hpp"
#include "streamrag/json_io.hpp"
#include "streamrag/reflector.hpp"
#include "streamrag/retrieval.hpp"
#include "streamrag/triggers.hpp"
#include "streamrag/types.hpp"

namespace streamrag::orch {

/// A stage delay: a constant, or an empirical sample list drawn uniformly.
class Delay {
 public:
  Delay() = default;
  Delay(Millis constant);  // NOLINT: implicit from a plain number is intended
  static Delay empirical(std::vector<Millis> samples);

  Millis sample(std::mt19937_64& rng) const;
  bool is_constant() const noexcept { return samples_.size() == 1; }
  const std::vector<Millis>& samples() const noexcept { return samples_; }

  friend bool operator==(const Delay&, const Delay&) = default;

 private:
  std::vector<Millis> samples_{0};
};

struct LatencyModel {
  Delay query_gen{590};
  Delay web_fetch{780};
  Delay chunk_rerank{2000};
  Delay kg_lookup{1000};
  Delay response_gen{2520};
  /// First token to last token.
  Delay response_tail{14180};
  /// Chance that a spawned tool call fails.
  double tool_failure_prob = 0.0;
  std::uint64_t seed = 0;

  /// Throws InputError for negative samples or a probability outside [0, 1].
  void validate() const;

  /// Every stage fixed; web fetch + rerank sum to `tool_ms`.
  static LatencyModel constant(Millis query_gen_ms, Millis tool_ms, Millis response_gen_ms);

  friend bool operator==(const LatencyModel&, const LatencyModel&) = default;
};

using reflector::CallStatus;

struct ToolCallThread {
  int id = 0;
  Tool tool = Tool::web;
  /// 0 for open-book calls, which are not tied to a block.
  BlockIndex block{0};
  ToolQuery query;
  Millis started_ms = 0;
  /// When the call completes (or would have, if cancelled).
  Millis finishes_ms = 0;
  /// Web only: when the top documents are known.
  Millis fetched_ms = 0;
  /// When the call stopped: completion, failure or cancellation.
  Millis ended_ms = 0;
  CallStatus status = CallStatus::pending;

  friend bool operator==(const ToolCallThread&, const ToolCallThread&) = default;
};

enum class EventType {
  block_ingested,
  query_fired,
  no_query,
  generation_failed,
  thread_done,
  thread_failed,
  thread_cancelled,
  reflected,
  references_ready,
  first_token,
  last_token,
};

std::string_view to_string(EventType t);
EventType event_type_from_string(std::string_view name);

struct SessionEvent {
  Millis t_ms = 0;
  EventType type = EventType::block_ingested;
  std::optional<Tool> tool;
  std::optional<BlockIndex> block;
  std::optional<int> thread;
  std::string detail;

  friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

/// Components of first-token latency, measured from the end of speech.
struct LatencyBreakdown {
  Millis query_gen_ms = 0;
  Millis tool_results_ms = 0;
  Millis response_gen_ms = 0;
  Millis first_token_ms = 0;
  Millis last_token_ms = 0;

  Millis total_ms() const noexcept { return query_gen_ms + tool_results_ms + response_gen_ms; }
  friend bool operator==(const LatencyBreakdown&, const LatencyBreakdown&) = default;
};

struct SessionOutcome {
  std::string utterance_id;
  Strategy strategy = Strategy::open_book;
  Millis speech_end_ms = 0;
  int blocks = 0;
  std::vector<SessionEvent> events;
  std::vector<ToolCallThread> threads;
  /// Earliest sufficient block per tool (fixed-interval only).
  std::map<Tool, BlockIndex> b_star;
  /// The final query per tool that references were ranked against.
  std::map<Tool, ToolQuery> final_queries;
  retrieval::ReferenceBundle references;
  LatencyBreakdown latency;
  int threads_spawned = 0;
  int threads_cancelled = 0;
  /// Most tool calls of one tool pending at the same instant.
  int max_parallel_threads = 0;
  /// Tools were attempted but none produced usable results.
  bool degraded = false;
  bool completed = false;
  std::vector<std::string> warnings;

  /// b* for the session: the later of the per-tool selections, if every
  /// attempted tool has one.
  std::optional<BlockIndex> overall_b_star() const;

  friend bool operator==(const SessionOutcome&, const SessionOutcome&) = default;
};

struct Backends {
  const retrieval::DocIndex* index = nullptr;
  const retrieval::KgStore* kg = nullptr;
};

/// Simulates one utterance on a virtual clock. Sampling uses
/// substream(config.rng_seed mixed with latency.seed, utterance_id).
/// Throws InputError for invalid traces or configs.
SessionOutcome run_session(const UtteranceTrace& trace, const SessionConfig& config,
                           const triggers::QueryGenerator& gen, const Backends& backends,
                           const LatencyModel& latency);

/// Scripted generator for the trace, with similarity settings from config.
SessionOutcome run_session(const UtteranceTrace& trace, const SessionConfig& config,
                           const Backends& backends, const LatencyModel& latency);

/// Throws std::logic_error for an incomplete session.
LatencyBreakdown first_token_latency(const SessionOutcome& outcome);

using GeneratorFactory =
    std::function<std::unique_ptr<triggers::QueryGenerator>(const UtteranceTrace&)>;

struct BatchItem {
  std::string utterance_id;
  std::optional<SessionOutcome> outcome;
  std::string error;

  bool ok() const noexcept { return outcome.has_value(); }
};

/// Runs every trace on up to `jobs` worker threads. Results keep input
/// order; a failing trace records its error and the batch continues.
std::vector<BatchItem> run_batch(const std::vector<UtteranceTrace>& traces,
                                 const SessionConfig& config, const Backends& backends,
                                 const LatencyModel& latency, int jobs = 1,
                                 GeneratorFactory factory = {});

inline constexpr int kOutcomeSchemaVersion = 1;

io::Json event_to_json(const SessionEvent& e);
SessionEvent event_from_json(const io::Json& j);
io::Json outcome_to_json(const SessionOutcome& o);
SessionOutcome outcome_from_json(const io::Json& j);

/// JSON per line; the per-session event log is embedded.
void write_outcomes(const std::vector<SessionOutcome>& outcomes,
                    const std::filesystem::path& path);
std::vector<SessionOutcome> read_outcomes(const std::filesystem::path& path);

/// One event per line, each tagged with its utterance_id.
void write_event_log(const std::vector<SessionOutcome>& outcomes,
                     const std::filesystem::path& path);

io::Json latency_model_to_json(const LatencyModel& m);
LatencyModel latency_model_from_json(const io::Json& j);

}  // namespace streamrag::orch
