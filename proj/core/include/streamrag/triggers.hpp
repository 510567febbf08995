#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamrag/config.hpp"
#include "streamrag/labeling.hpp"
#include "streamrag/trace.hpp"
#include "streamrag/types.hpp"

namespace streamrag::triggers {

/// What a generator sees for one block.
struct GenerationRequest {
  BlockIndex block;
  int prefix_words = 0;
  std::string prefix;
  /// Most recent fired query per tool; NoQuery under fixed-interval.
  ToolQuery prev_web;
  ToolQuery prev_kg;

  const ToolQuery& prev(Tool t) const { return t == Tool::web ? prev_web : prev_kg; }
};

struct GeneratedQueries {
  ToolQuery web;
  ToolQuery kg;

  const ToolQuery& of(Tool t) const { return t == Tool::web ? web : kg; }
  friend bool operator==(const GeneratedQueries&, const GeneratedQueries&) = default;
};

/// The generator could not produce queries for a block.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Produces tool queries for a transcript prefix.
///
/// Implementations must be deterministic in the request. `generate` may be
/// called concurrently for different sessions; a NoQuery result is only
/// honoured by the model-triggered policy. Throw GenerationError on failure.
class QueryGenerator {
 public:
  virtual ~QueryGenerator() = default;

  virtual GeneratedQueries generate(const GenerationRequest& request) const = 0;

  /// Latency this call is known to take. nullopt lets the session's latency
  /// model decide.
  virtual std::optional<Millis> declared_latency_ms(const GenerationRequest&) const {
    return std::nullopt;
  }
};

/// Replays the trace's scripted queries. When a previous query is supplied,
/// a scripted query similar to it (per labeling::similarity_f) comes back as
/// NoQuery, so the model-triggered simulation follows the training labels.
class ScriptedQueryGenerator final : public QueryGenerator {
 public:
  ScriptedQueryGenerator(const UtteranceTrace& trace, labeling::SimilarityContext similarity);

  GeneratedQueries generate(const GenerationRequest& request) const override;

 private:
  std::string utterance_id_;
  std::map<int, ScriptedEntry> scripted_;
  labeling::SimilarityContext similarity_;
};

struct TriggerAction {
  enum class Kind { fire, no_query, failed };

  Kind kind = Kind::no_query;
  ToolQuery query;
  std::string reason;

  static TriggerAction fire(ToolQuery q) { return {Kind::fire, std::move(q), {}}; }
  static TriggerAction no_query(std::string reason = {}) {
    return {Kind::no_query, ToolQuery::none(), std::move(reason)};
  }
  static TriggerAction failed(std::string reason) {
    return {Kind::failed, ToolQuery::none(), std::move(reason)};
  }

  bool fires() const noexcept { return kind == Kind::fire; }

  friend bool operator==(const TriggerAction&, const TriggerAction&) = default;
};

std::string_view to_string(TriggerAction::Kind k);

struct TriggerDecision {
  BlockIndex block;
  TriggerAction web;
  TriggerAction kg;
  Millis fired_at_ms = 0;

  const TriggerAction& action(Tool t) const { return t == Tool::web ? web : kg; }
  friend bool operator==(const TriggerDecision&, const TriggerDecision&) = default;
};

/// Fires a fresh query per tool from the prefix alone. Generator errors and
/// NoQuery results become failed actions.
TriggerDecision fixed_interval_step(const QueryGenerator& gen, const Block& block,
                                    Millis decided_at_ms);

/// Fires per tool only when the generator proposes a query for the prefix
/// given the previous fired queries. Generator errors keep the running calls
/// (no_query with the error as reason).
TriggerDecision model_trigger_step(const QueryGenerator& gen, const Block& block,
                                   const ToolQuery& prev_web, const ToolQuery& prev_kg,
                                   Millis decided_at_ms);

/// Runs a policy over every block, threading previous queries through for
/// model-triggered. Decisions are stamped with each block's ready time.
std::vector<TriggerDecision> replay(const QueryGenerator& gen, const std::vector<Block>& blocks,
                                    Strategy strategy);

}  // namespace streamrag::triggers
