#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "streamrag/retrieval.hpp"
#include "streamrag/types.hpp"

namespace streamrag::reflector {

enum class CallStatus { pending, done, cancelled, failed };

std::string_view to_string(CallStatus s);

struct ToolResult {
  std::optional<retrieval::WebResult> web;
  std::optional<std::string> kg_answer;
  Millis available_ms = 0;

  friend bool operator==(const ToolResult&, const ToolResult&) = default;
};

struct CacheEntry {
  BlockIndex block;
  ToolQuery query;
  std::optional<ToolResult> result;
  CallStatus status = CallStatus::pending;

  friend bool operator==(const CacheEntry&, const CacheEntry&) = default;
};

/// Per-tool intermediate queries of one session, in block order.
class QueryCache {
 public:
  /// Throws std::logic_error unless `block` exceeds every cached block of
  /// the tool.
  CacheEntry& add(Tool tool, BlockIndex block, ToolQuery query,
                  CallStatus status = CallStatus::pending);

  const std::vector<CacheEntry>& entries(Tool tool) const;
  CacheEntry* find(Tool tool, BlockIndex block);
  const CacheEntry* find(Tool tool, BlockIndex block) const;

  bool empty() const noexcept;

 private:
  std::map<Tool, std::vector<CacheEntry>> entries_;
};

struct ReflectContext {
  const retrieval::DocIndex* index = nullptr;
  const retrieval::KgStore* kg = nullptr;
  int top_k = 5;
  /// Compare top-k lists as sets; ordered lists otherwise.
  bool set_equality = false;
};

enum class ReflectReason { identical_query, top5_match, kg_result_match, insufficient };

std::string_view to_string(ReflectReason r);

struct Reflection {
  bool sufficient = false;
  ReflectReason reason = ReflectReason::insufficient;

  friend bool operator==(const Reflection&, const Reflection&) = default;
};

/// Whether an intermediate query retrieves what the final query would: equal
/// top-k web documents, or equal KG lookup results. A NoQuery intermediate
/// never suffices. Throws ToolMismatch across tools.
Reflection reflect(const ToolQuery& intermediate, const ToolQuery& final_query,
                   const ReflectContext& ctx);

struct Selection {
  BlockIndex block;
  Reflection reflection;

  friend bool operator==(const Selection&, const Selection&) = default;
};

/// Earliest cached call of `tool` that reflects against `final_query`.
/// Failed and cancelled calls are skipped. nullopt when none qualifies.
std::optional<Selection> select_earliest_sufficient(const QueryCache& cache, Tool tool,
                                                    const ToolQuery& final_query,
                                                    const ReflectContext& ctx);

/// Moves pending calls after `b_star` to cancelled and returns their blocks.
std::vector<BlockIndex> cancel_after(QueryCache& cache, Tool tool, BlockIndex b_star);

}  // namespace streamrag::reflector
