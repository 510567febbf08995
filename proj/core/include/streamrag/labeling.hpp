#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "streamrag/retrieval.hpp"
#include "streamrag/types.hpp"

namespace streamrag::labeling {

/// What the NO_QUERY heuristic compares against.
struct SimilarityContext {
  const retrieval::DocIndex* index = nullptr;
  int top_docs = 50;
  int top_k = 5;
  /// Compare top-k doc lists as sets ("remain unchanged").
  bool set_equality = true;
};

/// Same top-k documents for two web query texts.
bool same_top_docs(const retrieval::DocIndex& index, const std::string& a, const std::string& b,
                   int top_docs, int top_k, bool set_equality);

/// The NO_QUERY labelling heuristic: KG queries match exactly after
/// canonicalisation; web queries keep the same top-k documents. A NoQuery
/// `current` is always similar (nothing new to issue); otherwise a NoQuery
/// `prev` is never similar. Throws ToolMismatch across tools.
bool similarity_f(const ToolQuery& current, const ToolQuery& prev, const SimilarityContext& ctx);

struct LabeledStep {
  std::string utterance_id;
  Tool tool = Tool::web;
  BlockIndex block;
  std::string prefix;
  /// Previous query as presented to the model (the negative sample when
  /// is_negative_sample is set).
  ToolQuery prev_query;
  ToolQuery pseudo_gt;
  ToolQuery label;
  bool is_negative_sample = false;
  std::optional<ToolQuery> negative_prev;
  /// The true previous query a negative sample replaced.
  std::optional<ToolQuery> original_prev;

  friend bool operator==(const LabeledStep&, const LabeledStep&) = default;
};

/// Pseudo ground-truth queries keyed by block index.
using PseudoGt = std::map<int, ScriptedEntry>;

/// Per-block pseudo-GT taken from the trace's scripted queries. Throws
/// InputError naming the blocks whose prefix has no scripted entry.
PseudoGt pseudo_gt_from_trace(const UtteranceTrace& trace, Millis block_ms);

/// Labels every block for both tools: NO_QUERY when the block's pseudo-GT is
/// similar to the most recent non-NO_QUERY label, the pseudo-GT otherwise.
/// Steps are ordered by block, web before kg.
std::vector<LabeledStep> assign_streaming_labels(const UtteranceTrace& trace,
                                                 const PseudoGt& pseudo_gt, Millis block_ms,
                                                 const SimilarityContext& ctx);

struct NegativePool {
  std::vector<ToolQuery> web;
  std::vector<ToolQuery> kg;

  const std::vector<ToolQuery>& for_tool(Tool t) const { return t == Tool::web ? web : kg; }
  bool empty() const { return web.empty() && kg.empty(); }
};

/// Replaces each step's previous query with a pool sample (never the true
/// previous query) with probability `p`, forcing the label back to the
/// pseudo-GT. Throws InputError when p > 0 and the pool cannot supply a
/// sample for some tool.
std::vector<LabeledStep> inject_negative_samples(std::vector<LabeledStep> steps, double p,
                                                 std::uint64_t seed, const NegativePool& pool);

/// Pool of every pseudo-GT query from `others`, excluding `exclude_id`.
NegativePool negative_pool_excluding(const std::map<std::string, PseudoGt>& all,
                                     const std::string& exclude_id);

struct LabelSummary {
  std::size_t steps = 0;
  std::size_t fires = 0;
  std::size_t no_query = 0;
  std::size_t negatives = 0;

  friend bool operator==(const LabelSummary&, const LabelSummary&) = default;
};

LabelSummary summarize(const std::vector<LabeledStep>& steps);

/// Labels a batch: pseudo-GT per utterance (taken from the trace when
/// absent from `pseudo_gt`), then negative sampling with a pool of the other
/// utterances' queries and an RNG substream per utterance. Steps keep trace
/// order.
std::vector<LabeledStep> label_batch(const std::vector<UtteranceTrace>& traces,
                                     const std::map<std::string, PseudoGt>& pseudo_gt,
                                     Millis block_ms, const SimilarityContext& ctx, double p,
                                     std::uint64_t seed);

/// JSONL of {utterance_id, block, web, kg}. Throws InputError on duplicates.
std::map<std::string, PseudoGt> read_pseudo_gt(const std::filesystem::path& path);

/// One JSON object per line. Throws InputError with the path on I/O failure.
void export_training_set(const std::vector<LabeledStep>& steps, const std::filesystem::path& path);
std::vector<LabeledStep> import_training_set(const std::filesystem::path& path);

}  // namespace streamrag::labeling
