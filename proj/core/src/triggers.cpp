#include "streamrag/triggers.hpp"

namespace streamrag::triggers {

ScriptedQueryGenerator::ScriptedQueryGenerator(const UtteranceTrace& trace,
                                               labeling::SimilarityContext similarity)
    : utterance_id_(trace.utterance_id),
      scripted_(trace.scripted_queries),
      similarity_(similarity) {}

GeneratedQueries ScriptedQueryGenerator::generate(const GenerationRequest& request) const {
  auto it = scripted_.find(request.prefix_words);
  if (it == scripted_.end()) {
    throw GenerationError("utterance '" + utterance_id_ + "' has no scripted query for a " +
                          std::to_string(request.prefix_words) + "-word prefix");
  }
  GeneratedQueries out;
  for (Tool tool : kAllTools) {
    const ToolQuery& scripted = tool == Tool::web ? it->second.web : it->second.kg;
    ToolQuery& slot = tool == Tool::web ? out.web : out.kg;
    slot = labeling::similarity_f(scripted, request.prev(tool), similarity_) ? ToolQuery::none()
                                                                              : scripted;
  }
  return out;
}

std::string_view to_string(TriggerAction::Kind k) {
  switch (k) {
    case TriggerAction::Kind::fire: return "fire";
    case TriggerAction::Kind::no_query: return "no_query";
    case TriggerAction::Kind::failed: return "failed";
  }
  return "?";
}

namespace {

GenerationRequest request_for(const Block& block, const ToolQuery& prev_web,
                              const ToolQuery& prev_kg) {
  return GenerationRequest{block.index, block.prefix_words, block.prefix_text, prev_web, prev_kg};
}

}  // namespace

TriggerDecision fixed_interval_step(const QueryGenerator& gen, const Block& block,
                                    Millis decided_at_ms) {
  TriggerDecision d{block.index, {}, {}, decided_at_ms};
  GeneratedQueries q;
  try {
    q = gen.generate(request_for(block, ToolQuery::none(), ToolQuery::none()));
  } catch (const std::exception& e) {
    d.web = TriggerAction::failed(e.what());
    d.kg = TriggerAction::failed(e.what());
    return d;
  }
  for (Tool tool : kAllTools) {
    auto& action = tool == Tool::web ? d.web : d.kg;
    const auto& query = q.of(tool);
    if (query.is_none()) {
      action = TriggerAction::failed("generator returned NO_QUERY under fixed-interval");
    } else if (!query.belongs_to(tool)) {
      action = TriggerAction::failed("generator returned a " + std::string(to_string(query.tool())) +
                                     " query for " + std::string(to_string(tool)));
    } else {
      action = TriggerAction::fire(query);
    }
  }
  return d;
}

TriggerDecision model_trigger_step(const QueryGenerator& gen, const Block& block,
                                   const ToolQuery& prev_web, const ToolQuery& prev_kg,
                                   Millis decided_at_ms) {
  TriggerDecision d{block.index, {}, {}, decided_at_ms};
  GeneratedQueries q;
  try {
    q = gen.generate(request_for(block, prev_web, prev_kg));
  } catch (const std::exception& e) {
    const std::string reason = std::string("generator failed, keeping running call: ") + e.what();
    d.web = TriggerAction::no_query(reason);
    d.kg = TriggerAction::no_query(reason);
    return d;
  }
  for (Tool tool : kAllTools) {
    auto& action = tool == Tool::web ? d.web : d.kg;
    const auto& query = q.of(tool);
    if (query.is_none()) {
      action = TriggerAction::no_query();
    } else if (!query.belongs_to(tool)) {
      action = TriggerAction::no_query("generator returned a " +
                                       std::string(to_string(query.tool())) + " query for " +
                                       std::string(to_string(tool)) + ", ignored");
    } else {
      action = TriggerAction::fire(query);
    }
  }
  return d;
}

std::vector<TriggerDecision> replay(const QueryGenerator& gen, const std::vector<Block>& blocks,
                                    Strategy strategy) {
  std::vector<TriggerDecision> out;
  out.reserve(blocks.size());
  ToolQuery prev_web;
  ToolQuery prev_kg;
  for (const auto& block : blocks) {
    if (strategy == Strategy::model_triggered) {
      auto d = model_trigger_step(gen, block, prev_web, prev_kg, block.ready_ms);
      if (d.web.fires()) prev_web = d.web.query;
      if (d.kg.fires()) prev_kg = d.kg.query;
      out.push_back(std::move(d));
    } else {
      out.push_back(fixed_interval_step(gen, block, block.ready_ms));
    }
  }
  return out;
}

}  // namespace streamrag::triggers
