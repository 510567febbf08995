#include "streamrag/reflector.hpp"

#include <algorithm>

namespace streamrag::reflector {

std::string_view to_string(CallStatus s) {
  switch (s) {
    case CallStatus::pending: return "pending";
    case CallStatus::done: return "done";
    case CallStatus::cancelled: return "cancelled";
    case CallStatus::failed: return "failed";
  }
  return "?";
}

std::string_view to_string(ReflectReason r) {
  switch (r) {
    case ReflectReason::identical_query: return "identical_query";
    case ReflectReason::top5_match: return "top5_match";
    case ReflectReason::kg_result_match: return "kg_result_match";
    case ReflectReason::insufficient: return "insufficient";
  }
  return "?";
}

CacheEntry& QueryCache::add(Tool tool, BlockIndex block, ToolQuery query, CallStatus status) {
  auto& list = entries_[tool];
  if (!list.empty() && !(list.back().block < block)) {
    throw std::logic_error("QueryCache: blocks must be strictly increasing per tool");
  }
  list.push_back(CacheEntry{block, std::move(query), std::nullopt, status});
  return list.back();
}

const std::vector<CacheEntry>& QueryCache::entries(Tool tool) const {
  static const std::vector<CacheEntry> kEmpty;
  auto it = entries_.find(tool);
  return it == entries_.end() ? kEmpty : it->second;
}

CacheEntry* QueryCache::find(Tool tool, BlockIndex block) {
  auto it = entries_.find(tool);
  if (it == entries_.end()) return nullptr;
  for (auto& e : it->second) {
    if (e.block == block) return &e;
  }
  return nullptr;
}

const CacheEntry* QueryCache::find(Tool tool, BlockIndex block) const {
  return const_cast<QueryCache*>(this)->find(tool, block);
}

bool QueryCache::empty() const noexcept {
  return std::all_of(entries_.begin(), entries_.end(),
                     [](const auto& kv) { return kv.second.empty(); });
}

Reflection reflect(const ToolQuery& intermediate, const ToolQuery& final_query,
                   const ReflectContext& ctx) {
  if (intermediate.is_none()) return {};
  if (final_query.is_none()) throw std::invalid_argument("reflect: final query is NO_QUERY");
  if (intermediate.tool() != final_query.tool()) {
    throw ToolMismatch("reflect compares " + intermediate.describe() + " with " +
                       final_query.describe());
  }
  if (intermediate == final_query) return {true, ReflectReason::identical_query};

  if (intermediate.is_web()) {
    if (ctx.index == nullptr) throw std::invalid_argument("reflect: web comparison needs an index");
    auto a = retrieval::web_search(*ctx.index, intermediate, ctx.top_k).doc_ids();
    auto b = retrieval::web_search(*ctx.index, final_query, ctx.top_k).doc_ids();
    if (ctx.set_equality) {
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
    }
    return a == b ? Reflection{true, ReflectReason::top5_match} : Reflection{};
  }

  if (ctx.kg == nullptr) throw std::invalid_argument("reflect: KG comparison needs a store");
  if (retrieval::kg_lookup(*ctx.kg, intermediate) == retrieval::kg_lookup(*ctx.kg, final_query)) {
    return {true, ReflectReason::kg_result_match};
  }
  return {};
}

std::optional<Selection> select_earliest_sufficient(const QueryCache& cache, Tool tool,
                                                    const ToolQuery& final_query,
                                                    const ReflectContext& ctx) {
  for (const auto& e : cache.entries(tool)) {
    if (e.status == CallStatus::failed || e.status == CallStatus::cancelled) continue;
    auto r = reflect(e.query, final_query, ctx);
    if (r.sufficient) return Selection{e.block, r};
  }
  return std::nullopt;
}

std::vector<BlockIndex> cancel_after(QueryCache& cache, Tool tool, BlockIndex b_star) {
  std::vector<BlockIndex> cancelled;
  for (const auto& e : cache.entries(tool)) {
    if (b_star < e.block && e.status == CallStatus::pending) {
      auto* entry = cache.find(tool, e.block);
      entry->status = CallStatus::cancelled;
      entry->result.reset();
      cancelled.push_back(e.block);
    }
  }
  return cancelled;
}

}  // namespace streamrag::reflector
