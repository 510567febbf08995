#include "streamrag/labeling.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "streamrag/json_io.hpp"
#include "streamrag/random.hpp"
#include "streamrag/trace.hpp"

namespace streamrag::labeling {

bool same_top_docs(const retrieval::DocIndex& index, const std::string& a, const std::string& b,
                   int top_docs, int top_k, bool set_equality) {
  const int k = std::max(top_docs, top_k);
  auto lhs = retrieval::web_search(index, a, k).doc_ids(static_cast<std::size_t>(top_k));
  auto rhs = retrieval::web_search(index, b, k).doc_ids(static_cast<std::size_t>(top_k));
  if (set_equality) {
    std::sort(lhs.begin(), lhs.end());
    std::sort(rhs.begin(), rhs.end());
  }
  return lhs == rhs;
}

bool similarity_f(const ToolQuery& current, const ToolQuery& prev, const SimilarityContext& ctx) {
  if (current.is_none()) return true;
  if (prev.is_none()) return false;
  if (current.tool() != prev.tool()) {
    throw ToolMismatch("similarity_f compares queries of different tools: " + current.describe() +
                       " vs " + prev.describe());
  }
  if (current.is_kg()) return current.kg_query().canonical() == prev.kg_query().canonical();
  if (current.web_text() == prev.web_text()) return true;
  if (ctx.index == nullptr) throw std::invalid_argument("similarity_f: web comparison needs an index");
  return same_top_docs(*ctx.index, current.web_text(), prev.web_text(), ctx.top_docs, ctx.top_k,
                       ctx.set_equality);
}

PseudoGt pseudo_gt_from_trace(const UtteranceTrace& trace, Millis block_ms) {
  PseudoGt out;
  std::vector<int> missing;
  for (const auto& block : blocks_of(trace, block_ms)) {
    auto it = trace.scripted_queries.find(block.prefix_words);
    if (it == trace.scripted_queries.end()) {
      missing.push_back(block.index.value);
    } else {
      out.emplace(block.index.value, it->second);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (int b : missing) list += (list.empty() ? "" : ", ") + std::to_string(b);
    throw InputError("utterance '" + trace.utterance_id + "': no pseudo-GT for blocks " + list);
  }
  return out;
}

std::vector<LabeledStep> assign_streaming_labels(const UtteranceTrace& trace,
                                                 const PseudoGt& pseudo_gt, Millis block_ms,
                                                 const SimilarityContext& ctx) {
  auto blocks = blocks_of(trace, block_ms);
  std::vector<int> missing;
  for (const auto& b : blocks) {
    if (!pseudo_gt.contains(b.index.value)) missing.push_back(b.index.value);
  }
  if (!missing.empty()) {
    std::string list;
    for (int b : missing) list += (list.empty() ? "" : ", ") + std::to_string(b);
    throw InputError("utterance '" + trace.utterance_id + "': missing pseudo-GT for blocks " +
                     list);
  }

  ToolQuery prev_web;
  ToolQuery prev_kg;
  std::vector<LabeledStep> steps;
  steps.reserve(blocks.size() * 2);
  for (const auto& b : blocks) {
    const auto& gt = pseudo_gt.at(b.index.value);
    for (Tool tool : kAllTools) {
      auto& prev = tool == Tool::web ? prev_web : prev_kg;
      const auto& current = tool == Tool::web ? gt.web : gt.kg;
      if (!current.belongs_to(tool)) {
        throw ToolMismatch("pseudo-GT for tool " + std::string(to_string(tool)) + " at block " +
                           std::to_string(b.index.value) + " is " + current.describe());
      }
      LabeledStep step;
      step.utterance_id = trace.utterance_id;
      step.tool = tool;
      step.block = b.index;
      step.prefix = b.prefix_text;
      step.prev_query = prev;
      step.pseudo_gt = current;
      step.label = similarity_f(current, prev, ctx) ? ToolQuery::none() : current;
      if (!step.label.is_none()) prev = step.label;
      steps.push_back(std::move(step));
    }
  }
  return steps;
}

std::vector<LabeledStep> inject_negative_samples(std::vector<LabeledStep> steps, double p,
                                                 std::uint64_t seed, const NegativePool& pool) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("negative-sample probability must lie in [0, 1]");
  if (p == 0.0) return steps;
  if (pool.empty()) throw InputError("negative sampling needs a non-empty pool");

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution pick(p);
  for (auto& step : steps) {
    if (!pick(rng)) continue;
    const auto& candidates = pool.for_tool(step.tool);
    const bool any_usable = std::any_of(candidates.begin(), candidates.end(),
                                        [&](const ToolQuery& q) { return q != step.prev_query; });
    if (!any_usable) {
      throw InputError("negative pool has no " + std::string(to_string(step.tool)) +
                       " query different from the previous query of '" + step.utterance_id + "'");
    }
    std::uniform_int_distribution<std::size_t> draw(0, candidates.size() - 1);
    const ToolQuery* sample = &candidates[draw(rng)];
    while (*sample == step.prev_query) sample = &candidates[draw(rng)];

    step.original_prev = step.prev_query;
    step.prev_query = *sample;
    step.negative_prev = *sample;
    step.label = step.pseudo_gt;
    step.is_negative_sample = true;
  }
  return steps;
}

NegativePool negative_pool_excluding(const std::map<std::string, PseudoGt>& all,
                                     const std::string& exclude_id) {
  NegativePool pool;
  for (const auto& [id, gt] : all) {
    if (id == exclude_id) continue;
    for (const auto& [block, entry] : gt) {
      if (!entry.web.is_none() &&
          std::find(pool.web.begin(), pool.web.end(), entry.web) == pool.web.end()) {
        pool.web.push_back(entry.web);
      }
      if (!entry.kg.is_none() &&
          std::find(pool.kg.begin(), pool.kg.end(), entry.kg) == pool.kg.end()) {
        pool.kg.push_back(entry.kg);
      }
    }
  }
  return pool;
}

LabelSummary summarize(const std::vector<LabeledStep>& steps) {
  LabelSummary s;
  s.steps = steps.size();
  for (const auto& step : steps) {
    if (step.label.is_none()) {
      ++s.no_query;
    } else {
      ++s.fires;
    }
    if (step.is_negative_sample) ++s.negatives;
  }
  return s;
}

std::vector<LabeledStep> label_batch(const std::vector<UtteranceTrace>& traces,
                                     const std::map<std::string, PseudoGt>& pseudo_gt,
                                     Millis block_ms, const SimilarityContext& ctx, double p,
                                     std::uint64_t seed) {
  std::map<std::string, PseudoGt> all;
  for (const auto& t : traces) {
    auto it = pseudo_gt.find(t.utterance_id);
    const bool fresh = all.emplace(t.utterance_id, it != pseudo_gt.end()
                                                       ? it->second
                                                       : pseudo_gt_from_trace(t, block_ms))
                           .second;
    if (!fresh) throw InputError("duplicate utterance_id '" + t.utterance_id + "'");
  }
  std::vector<LabeledStep> out;
  for (const auto& t : traces) {
    auto steps = assign_streaming_labels(t, all.at(t.utterance_id), block_ms, ctx);
    if (p > 0.0) {
      const std::uint64_t utterance_seed = substream(seed, t.utterance_id)();
      steps = inject_negative_samples(std::move(steps), p, utterance_seed,
                                      negative_pool_excluding(all, t.utterance_id));
    }
    out.insert(out.end(), std::make_move_iterator(steps.begin()),
               std::make_move_iterator(steps.end()));
  }
  return out;
}

std::map<std::string, PseudoGt> read_pseudo_gt(const std::filesystem::path& path) {
  std::map<std::string, PseudoGt> out;
  io::for_each_jsonl(path, [&](const io::Json& j, std::size_t) {
    const auto id = j.at("utterance_id").get<std::string>();
    const int block = j.at("block").get<int>();
    if (block < 1) throw InputError("block must be >= 1");
    ScriptedEntry e{io::query_from_json(j.value("web", io::Json(nullptr)), Tool::web),
                    io::query_from_json(j.value("kg", io::Json(nullptr)), Tool::kg)};
    if (!out[id].emplace(block, std::move(e)).second) {
      throw InputError("duplicate pseudo-GT for '" + id + "' block " + std::to_string(block));
    }
  });
  return out;
}

namespace {

io::Json step_to_json(const LabeledStep& s) {
  io::Json j;
  j["utterance_id"] = s.utterance_id;
  j["tool"] = std::string(to_string(s.tool));
  j["block"] = s.block.value;
  j["prefix_text"] = s.prefix;
  j["prev_query"] = io::query_to_json(s.prev_query);
  j["label"] = io::query_to_json(s.label);
  j["is_negative_sample"] = s.is_negative_sample;
  j["pseudo_gt"] = io::query_to_json(s.pseudo_gt);
  if (s.negative_prev) j["negative_prev"] = io::query_to_json(*s.negative_prev);
  if (s.original_prev) j["original_prev"] = io::query_to_json(*s.original_prev);
  return j;
}

LabeledStep step_from_json(const io::Json& j) {
  LabeledStep s;
  s.utterance_id = j.at("utterance_id").get<std::string>();
  s.tool = tool_from_string(j.at("tool").get<std::string>());
  s.block = BlockIndex{j.at("block").get<int>()};
  s.prefix = j.at("prefix_text").get<std::string>();
  s.prev_query = io::query_from_json(j.at("prev_query"), s.tool);
  s.label = io::query_from_json(j.at("label"), s.tool);
  s.is_negative_sample = j.at("is_negative_sample").get<bool>();
  s.pseudo_gt = io::query_from_json(j.at("pseudo_gt"), s.tool);
  if (j.contains("negative_prev")) s.negative_prev = io::query_from_json(j["negative_prev"], s.tool);
  if (j.contains("original_prev")) s.original_prev = io::query_from_json(j["original_prev"], s.tool);
  return s;
}

}  // namespace

void export_training_set(const std::vector<LabeledStep>& steps, const std::filesystem::path& path) {
  std::string out;
  for (const auto& s : steps) out += step_to_json(s).dump() + "\n";
  io::write_file_atomic(path, out);
}

std::vector<LabeledStep> import_training_set(const std::filesystem::path& path) {
  std::vector<LabeledStep> steps;
  io::for_each_jsonl(path, [&](const io::Json& j, std::size_t) {
    steps.push_back(step_from_json(j));
  });
  return steps;
}

}  // namespace streamrag::labeling
