#include "streamrag/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "streamrag/random.hpp"
#include "streamrag/sim_clock.hpp"
#include "streamrag/trace.hpp"

namespace streamrag::orch {

Delay::Delay(Millis constant) : samples_{constant} {}

Delay Delay::empirical(std::vector<Millis> samples) {
  if (samples.empty()) throw InputError("empirical delay needs at least one sample");
  Delay d;
  d.samples_ = std::move(samples);
  return d;
}

Millis Delay::sample(std::mt19937_64& rng) const {
  if (samples_.size() == 1) return samples_.front();
  std::uniform_int_distribution<std::size_t> pick(0, samples_.size() - 1);
  return samples_[pick(rng)];
}

void LatencyModel::validate() const {
  for (const Delay* d : {&query_gen, &web_fetch, &chunk_rerank, &kg_lookup, &response_gen,
                         &response_tail}) {
    for (Millis s : d->samples()) {
      if (s < 0) throw InputError("latency samples must be >= 0");
    }
  }
  if (!(tool_failure_prob >= 0.0 && tool_failure_prob <= 1.0)) {
    throw InputError("tool_failure_prob must lie in [0, 1]");
  }
}

LatencyModel LatencyModel::constant(Millis query_gen_ms, Millis tool_ms, Millis response_gen_ms) {
  LatencyModel m;
  m.query_gen = query_gen_ms;
  m.web_fetch = tool_ms / 4;
  m.chunk_rerank = tool_ms - tool_ms / 4;
  m.kg_lookup = tool_ms;
  m.response_gen = response_gen_ms;
  return m;
}

std::string_view to_string(EventType t) {
  switch (t) {
    case EventType::block_ingested: return "block_ingested";
    case EventType::query_fired: return "query_fired";
    case EventType::no_query: return "no_query";
    case EventType::generation_failed: return "generation_failed";
    case EventType::thread_done: return "thread_done";
    case EventType::thread_failed: return "thread_failed";
    case EventType::thread_cancelled: return "thread_cancelled";
    case EventType::reflected: return "reflected";
    case EventType::references_ready: return "references_ready";
    case EventType::first_token: return "first_token";
    case EventType::last_token: return "last_token";
  }
  return "?";
}

EventType event_type_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(EventType::last_token); ++i) {
    auto t = static_cast<EventType>(i);
    if (to_string(t) == name) return t;
  }
  throw InputError("unknown event type '" + std::string(name) + "'");
}

std::optional<BlockIndex> SessionOutcome::overall_b_star() const {
  if (strategy != Strategy::fixed_interval || b_star.empty()) return std::nullopt;
  for (const auto& [tool, q] : final_queries) {
    if (!b_star.contains(tool)) return std::nullopt;
  }
  BlockIndex out{1};
  for (const auto& [tool, b] : b_star) out = std::max(out, b);
  return out;
}

namespace {

struct Ev {
  enum class Kind { block_ready, gen_done, utterance_end, thread_end, reflect, first_token, last_token };
  Kind kind;
  int block = 0;
  int thread = -1;
  Tool tool = Tool::web;
};

std::size_t slot(Tool t) { return t == Tool::web ? 0 : 1; }

std::optional<BlockIndex> opt_block(BlockIndex b) {
  return b.value > 0 ? std::optional<BlockIndex>(b) : std::nullopt;
}

class Session {
 public:
  Session(const UtteranceTrace& trace, const SessionConfig& config,
          const triggers::QueryGenerator& gen, const Backends& backends,
          const LatencyModel& latency)
      : trace_(trace),
        config_(config),
        gen_(gen),
        backends_(backends),
        latency_(latency),
        rng_(substream(config.rng_seed ^ (latency.seed * 0x9E3779B97F4A7C15ULL),
                       trace.utterance_id)) {}

  SessionOutcome run() {
    validate_trace(trace_);
    config_.validate();
    latency_.validate();
    if (config_.strategy != Strategy::closed_book &&
        (backends_.index == nullptr || backends_.kg == nullptr)) {
      throw InputError("strategy " + std::string(to_string(config_.strategy)) +
                       " needs a document index and a KG store");
    }

    speech_end_ = speech_end_ms(trace_);
    utterance_end_ = speech_end_ + config_.endpoint_delay_ms;
    blocks_ = blocks_of(trace_, config_.block_ms);

    out_.utterance_id = trace_.utterance_id;
    out_.strategy = config_.strategy;
    out_.speech_end_ms = speech_end_;
    out_.blocks = static_cast<int>(blocks_.size());

    if (streaming()) {
      for (const auto& b : blocks_) clock_.schedule(b.ready_ms, {Ev::Kind::block_ready, b.index.value});
    }
    clock_.schedule(utterance_end_, {Ev::Kind::utterance_end});

    while (auto ev = clock_.step()) dispatch(ev->event);

    out_.max_parallel_threads = max_parallel();
    out_.completed = first_token_at_.has_value() && last_token_seen_;
    return std::move(out_);
  }

 private:
  bool streaming() const {
    return config_.strategy == Strategy::fixed_interval ||
           config_.strategy == Strategy::model_triggered;
  }

  void log(EventType type, std::optional<Tool> tool = std::nullopt,
           std::optional<BlockIndex> block = std::nullopt, std::optional<int> thread = std::nullopt,
           std::string detail = {}) {
    out_.events.push_back(SessionEvent{clock_.now(), type, tool, block, thread, std::move(detail)});
  }

  void warn(std::string message) { out_.warnings.push_back(std::move(message)); }

  void dispatch(const Ev& ev) {
    switch (ev.kind) {
      case Ev::Kind::block_ready: on_block_ready(ev.block); break;
      case Ev::Kind::gen_done: on_gen_done(ev.block); break;
      case Ev::Kind::utterance_end: on_utterance_end(); break;
      case Ev::Kind::thread_end: on_thread_end(ev.thread); break;
      case Ev::Kind::reflect: on_reflect(ev.tool); break;
      case Ev::Kind::first_token: on_first_token(); break;
      case Ev::Kind::last_token:
        log(EventType::last_token);
        last_token_seen_ = true;
        break;
    }
  }

  const Block& block(int b) const { return blocks_.at(static_cast<std::size_t>(b - 1)); }

  Millis generation_delay(const Block& b) {
    triggers::GenerationRequest req{b.index, b.prefix_words, b.prefix_text, prev_[0], prev_[1]};
    if (auto declared = gen_.declared_latency_ms(req)) return std::max<Millis>(0, *declared);
    return latency_.query_gen.sample(rng_);
  }

  // Streaming blocks.

  void on_block_ready(int b) {
    const Block& blk = block(b);
    log(EventType::block_ingested, std::nullopt, blk.index, std::nullopt, blk.prefix_text);
    // Decisions are delivered in block order even when generation overlaps.
    const Millis decided = std::max(clock_.now() + generation_delay(blk), last_decision_);
    last_decision_ = decided;
    clock_.schedule(decided, {Ev::Kind::gen_done, b});
  }

  void on_gen_done(int b) {
    if (b == 0) return on_open_book_generated();
    const Block& blk = block(b);
    if (config_.strategy == Strategy::fixed_interval) {
      auto d = triggers::fixed_interval_step(gen_, blk, clock_.now());
      for (Tool tool : kAllTools) {
        const auto& action = d.action(tool);
        if (action.fires()) {
          int id = spawn(tool, blk.index, action.query);
          cache_.add(tool, blk.index, action.query);
          cache_thread_[{slot(tool), b}] = id;
        } else {
          int id = failed_generation(tool, blk.index, action.reason);
          cache_.add(tool, blk.index, ToolQuery::none(), CallStatus::failed);
          cache_thread_[{slot(tool), b}] = id;
        }
      }
    } else {
      auto d = triggers::model_trigger_step(gen_, blk, prev_[0], prev_[1], clock_.now());
      for (Tool tool : kAllTools) {
        const auto& action = d.action(tool);
        if (action.fires()) {
          if (auto cur = current_[slot(tool)]; cur && thread(*cur).status == CallStatus::pending) {
            cancel(*cur);
          }
          current_[slot(tool)] = spawn(tool, blk.index, action.query);
          prev_[slot(tool)] = action.query;
        } else {
          if (!action.reason.empty()) warn("block " + std::to_string(b) + " " +
                                           std::string(to_string(tool)) + ": " + action.reason);
          log(EventType::no_query, tool, blk.index, std::nullopt, action.reason);
        }
      }
    }
    if (b == static_cast<int>(blocks_.size())) {
      final_generated_ = true;
      maybe_finish_stream();
    }
  }

  void on_utterance_end() {
    utterance_over_ = true;
    switch (config_.strategy) {
      case Strategy::closed_book:
        stream_done_at_ = clock_.now();
        references_ready();
        break;
      case Strategy::open_book: {
        Block full{BlockIndex{0}, utterance_end_, utterance_end_,
                   static_cast<int>(trace_.words.size()),
                   prefix_text(trace_, static_cast<int>(trace_.words.size()))};
        open_book_block_ = full;
        clock_.schedule_after(generation_delay(full), {Ev::Kind::gen_done, 0});
        break;
      }
      default:
        maybe_finish_stream();
        break;
    }
  }

  void on_open_book_generated() {
    stream_done_at_ = clock_.now();
    auto d = triggers::fixed_interval_step(gen_, *open_book_block_, clock_.now());
    for (Tool tool : kAllTools) {
      const auto& action = d.action(tool);
      if (action.fires()) {
        int id = spawn(tool, BlockIndex{0}, action.query);
        out_.final_queries[tool] = action.query;
        await(tool, id);
      } else {
        failed_generation(tool, BlockIndex{0}, action.reason);
        warn(std::string(to_string(tool)) + ": " + action.reason);
      }
    }
    awaiting_ = true;
    resolve_if_ready();
  }

  void maybe_finish_stream() {
    if (!final_generated_ || !utterance_over_ || stream_done_at_) return;
    stream_done_at_ = clock_.now();
    if (config_.strategy == Strategy::fixed_interval) {
      for (Tool tool : kAllTools) schedule_reflection(tool);
    } else {
      for (Tool tool : kAllTools) {
        if (auto cur = current_[slot(tool)]) {
          out_.final_queries[tool] = thread(*cur).query;
          await(tool, *cur);
        }
      }
    }
    awaiting_ = true;
    resolve_if_ready();
  }

  // Fixed-interval reflection.

  void schedule_reflection(Tool tool) {
    const auto& entries = cache_.entries(tool);
    const reflector::CacheEntry* final_entry = nullptr;
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
      if (it->status != CallStatus::failed) {
        final_entry = &*it;
        break;
      }
    }
    if (final_entry == nullptr) {
      warn(std::string(to_string(tool)) + ": no query was generated for any block");
      return;
    }
    if (final_entry->block.value != static_cast<int>(blocks_.size())) {
      warn(std::string(to_string(tool)) + ": final block failed, reflecting against block " +
           std::to_string(final_entry->block.value));
    }
    out_.final_queries[tool] = final_entry->query;

    // The reflector needs the final call's top documents (or KG answer)
    // unless an earlier query is literally the final one.
    Millis at = clock_.now();
    const auto& final_thread = thread(cache_thread_.at({slot(tool), final_entry->block.value}));
    for (const auto& e : entries) {
      if (e.status == CallStatus::failed) continue;
      if (e.query == final_entry->query) break;
      const auto& t = thread(cache_thread_.at({slot(tool), e.block.value}));
      at = std::max({at, t.fetched_ms, final_thread.fetched_ms});
    }
    awaited_[slot(tool)] = -1;
    clock_.schedule(at, {Ev::Kind::reflect, 0, -1, tool});
  }

  void on_reflect(Tool tool) {
    reflector::ReflectContext ctx{backends_.index, backends_.kg, config_.reflect_top_k,
                                  config_.reflect_set_equality};
    const auto& final_query = out_.final_queries.at(tool);
    auto sel = reflector::select_earliest_sufficient(cache_, tool, final_query, ctx);
    awaited_[slot(tool)].reset();
    if (!sel) {
      log(EventType::reflected, tool, std::nullopt, std::nullopt, "insufficient");
      warn(std::string(to_string(tool)) + ": no usable call after reflection");
      resolve_if_ready();
      return;
    }
    out_.b_star[tool] = sel->block;
    log(EventType::reflected, tool, sel->block, std::nullopt,
        "b*=" + std::to_string(sel->block.value) + " " + std::string(to_string(sel->reflection.reason)));
    for (BlockIndex b : reflector::cancel_after(cache_, tool, sel->block)) {
      cancel(cache_thread_.at({slot(tool), b.value}));
    }
    await(tool, cache_thread_.at({slot(tool), sel->block.value}));
    resolve_if_ready();
  }

  // Threads.

  ToolCallThread& thread(int id) { return out_.threads.at(static_cast<std::size_t>(id)); }

  int spawn(Tool tool, BlockIndex b, const ToolQuery& query) {
    ToolCallThread t;
    t.id = static_cast<int>(out_.threads.size());
    t.tool = tool;
    t.block = b;
    t.query = query;
    t.started_ms = clock_.now();
    if (tool == Tool::web) {
      const Millis fetch = latency_.web_fetch.sample(rng_);
      const Millis rerank = latency_.chunk_rerank.sample(rng_);
      t.fetched_ms = t.started_ms + fetch;
      t.finishes_ms = t.fetched_ms + rerank;
    } else {
      t.finishes_ms = t.started_ms + latency_.kg_lookup.sample(rng_);
      t.fetched_ms = t.finishes_ms;
    }
    bool fails = false;
    if (latency_.tool_failure_prob > 0.0) {
      fails = std::bernoulli_distribution(latency_.tool_failure_prob)(rng_);
    }
    out_.threads.push_back(t);
    will_fail_.push_back(fails);
    ++out_.threads_spawned;
    log(EventType::query_fired, tool, opt_block(b), t.id,
        query.describe());
    clock_.schedule(t.finishes_ms, {Ev::Kind::thread_end, 0, t.id, tool});
    return t.id;
  }

  int failed_generation(Tool tool, BlockIndex b, const std::string& reason) {
    ToolCallThread t;
    t.id = static_cast<int>(out_.threads.size());
    t.tool = tool;
    t.block = b;
    t.started_ms = t.finishes_ms = t.fetched_ms = t.ended_ms = clock_.now();
    t.status = CallStatus::failed;
    out_.threads.push_back(t);
    will_fail_.push_back(true);
    ++out_.threads_spawned;
    log(EventType::generation_failed, tool, opt_block(b), t.id,
        reason);
    return t.id;
  }

  void set_cache_status(const ToolCallThread& t) {
    if (config_.strategy != Strategy::fixed_interval) return;
    if (auto* e = cache_.find(t.tool, t.block)) {
      if (e->status == CallStatus::pending) e->status = t.status;
    }
  }

  void on_thread_end(int id) {
    auto& t = thread(id);
    if (t.status != CallStatus::pending) return;
    t.ended_ms = clock_.now();
    const auto block = opt_block(t.block);
    if (will_fail_[static_cast<std::size_t>(id)]) {
      t.status = CallStatus::failed;
      log(EventType::thread_failed, t.tool, block, id);
    } else {
      t.status = CallStatus::done;
      log(EventType::thread_done, t.tool, block, id);
    }
    set_cache_status(t);
    resolve_if_ready();
  }

  void cancel(int id) {
    auto& t = thread(id);
    t.status = CallStatus::cancelled;
    t.ended_ms = clock_.now();
    ++out_.threads_cancelled;
    log(EventType::thread_cancelled, t.tool, opt_block(t.block),
        id);
    set_cache_status(t);
  }

  void await(Tool tool, int id) { awaited_[slot(tool)] = id; }

  void resolve_if_ready() {
    if (!awaiting_ || refs_done_) return;
    for (const auto& a : awaited_) {
      if (!a) continue;
      if (*a < 0 || thread(*a).status == CallStatus::pending) return;
    }
    references_ready();
  }

  // Response.

  void references_ready() {
    refs_done_ = true;
    const retrieval::WebResult* web_ptr = nullptr;
    retrieval::WebResult web;
    std::optional<std::string> kg_answer;
    bool attempted = false;
    bool usable = false;
    for (Tool tool : kAllTools) {
      const auto& a = awaited_[slot(tool)];
      if (out_.final_queries.contains(tool)) attempted = true;
      if (!a || *a < 0) continue;
      const auto& t = thread(*a);
      if (t.status != CallStatus::done) {
        warn(std::string(to_string(tool)) + ": awaited call " + std::to_string(t.id) + " failed");
        continue;
      }
      usable = true;
      if (tool == Tool::web) {
        web = retrieval::web_search(*backends_.index, t.query, config_.top_docs);
        web = retrieval::chunk_and_rerank(*backends_.index, std::move(web),
                                          out_.final_queries.at(tool).web_text(),
                                          config_.chunk_tokens, config_.context_docs);
        web_ptr = &web;
      } else {
        kg_answer = retrieval::kg_lookup(*backends_.kg, t.query);
      }
    }
    if (config_.strategy != Strategy::closed_book && !attempted) {
      for (const auto& th : out_.threads) attempted = attempted || th.status == CallStatus::failed;
    }
    out_.degraded = config_.strategy != Strategy::closed_book && attempted && !usable;
    out_.references = retrieval::assemble_references(web_ptr, kg_answer, config_.ref_length_tokens,
                                                     config_.web_kg_ratio);
    log(EventType::references_ready, std::nullopt, std::nullopt, std::nullopt,
        "tokens=" + std::to_string(out_.references.total_tokens) +
            (out_.degraded ? " degraded" : ""));

    const Millis rg = latency_.response_gen.sample(rng_);
    out_.latency.query_gen_ms = *stream_done_at_ - speech_end_;
    out_.latency.tool_results_ms = clock_.now() - *stream_done_at_;
    out_.latency.response_gen_ms = rg;
    first_token_at_ = clock_.now() + rg;
    out_.latency.first_token_ms = *first_token_at_ - speech_end_;
    clock_.schedule(*first_token_at_, {Ev::Kind::first_token});
  }

  void on_first_token() {
    log(EventType::first_token);
    const Millis tail = latency_.response_tail.sample(rng_);
    out_.latency.last_token_ms = out_.latency.first_token_ms + tail;
    clock_.schedule_after(tail, {Ev::Kind::last_token});
  }

  int max_parallel() const {
    int best = 0;
    for (Tool tool : kAllTools) {
      std::vector<std::pair<Millis, int>> edges;
      for (const auto& t : out_.threads) {
        if (t.tool != tool || t.ended_ms <= t.started_ms) continue;
        edges.emplace_back(t.started_ms, +1);
        edges.emplace_back(t.ended_ms, -1);
      }
      // Ends sort before starts at the same instant.
      std::sort(edges.begin(), edges.end());
      int live = 0;
      for (const auto& [at, delta] : edges) {
        live += delta;
        best = std::max(best, live);
      }
    }
    return best;
  }

  const UtteranceTrace& trace_;
  const SessionConfig& config_;
  const triggers::QueryGenerator& gen_;
  Backends backends_;
  const LatencyModel& latency_;
  std::mt19937_64 rng_;

  SimClock<Ev> clock_;
  SessionOutcome out_;
  std::vector<Block> blocks_;
  std::optional<Block> open_book_block_;
  Millis speech_end_ = 0;
  Millis utterance_end_ = 0;
  Millis last_decision_ = 0;

  reflector::QueryCache cache_;
  std::map<std::pair<std::size_t, int>, int> cache_thread_;
  std::vector<bool> will_fail_;
  ToolQuery prev_[2];
  std::optional<int> current_[2];

  bool final_generated_ = false;
  bool utterance_over_ = false;
  std::optional<Millis> stream_done_at_;
  /// Per tool: the thread whose result feeds the references; -1 while a
  /// reflection is outstanding.
  std::optional<int> awaited_[2];
  bool awaiting_ = false;
  bool refs_done_ = false;
  std::optional<Millis> first_token_at_;
  bool last_token_seen_ = false;
};

labeling::SimilarityContext similarity_for(const SessionConfig& config, const Backends& backends) {
  return labeling::SimilarityContext{backends.index, config.top_docs, config.reflect_top_k, true};
}

}  // namespace

SessionOutcome run_session(const UtteranceTrace& trace, const SessionConfig& config,
                           const triggers::QueryGenerator& gen, const Backends& backends,
                           const LatencyModel& latency) {
  return Session(trace, config, gen, backends, latency).run();
}

SessionOutcome run_session(const UtteranceTrace& trace, const SessionConfig& config,
                           const Backends& backends, const LatencyModel& latency) {
  validate_trace(trace);
  if (config.strategy == Strategy::fixed_interval) {
    auto missing = missing_scripted_prefixes(trace, config.block_ms);
    if (!missing.empty()) {
      std::string list;
      for (int n : missing) list += (list.empty() ? "" : ", ") + std::to_string(n);
      throw InputError("utterance '" + trace.utterance_id +
                       "': fixed-interval needs scripted queries for prefixes of " + list +
                       " words");
    }
  }
  if (config.strategy == Strategy::open_book &&
      !trace.scripted_queries.contains(static_cast<int>(trace.words.size()))) {
    throw InputError("utterance '" + trace.utterance_id +
                     "': open-book needs a scripted query for the full transcript");
  }
  triggers::ScriptedQueryGenerator gen(trace, similarity_for(config, backends));
  return run_session(trace, config, gen, backends, latency);
}

LatencyBreakdown first_token_latency(const SessionOutcome& outcome) {
  if (!outcome.completed) {
    throw std::logic_error("session '" + outcome.utterance_id + "' did not complete");
  }
  return outcome.latency;
}

std::vector<BatchItem> run_batch(const std::vector<UtteranceTrace>& traces,
                                 const SessionConfig& config, const Backends& backends,
                                 const LatencyModel& latency, int jobs, GeneratorFactory factory) {
  if (traces.empty()) throw InputError("run_batch needs at least one trace");
  std::vector<BatchItem> results(traces.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < traces.size(); i = next++) {
      const auto& trace = traces[i];
      auto& item = results[i];
      item.utterance_id = trace.utterance_id;
      try {
        if (factory) {
          auto gen = factory(trace);
          item.outcome = run_session(trace, config, *gen, backends, latency);
        } else {
          item.outcome = run_session(trace, config, backends, latency);
        }
      } catch (const std::exception& e) {
        item.error = e.what();
      }
    }
  };

  const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, 256));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, traces.size()); ++w) pool.emplace_back(work);
  }
  return results;
}

// JSON.

namespace {

io::Json optional_block(const std::optional<BlockIndex>& b) {
  return b ? io::Json(b->value) : io::Json(nullptr);
}

}  // namespace

io::Json event_to_json(const SessionEvent& e) {
  io::Json j;
  j["t_ms"] = e.t_ms;
  j["type"] = std::string(to_string(e.type));
  j["tool"] = e.tool ? io::Json(std::string(to_string(*e.tool))) : io::Json(nullptr);
  j["block"] = optional_block(e.block);
  j["thread"] = e.thread ? io::Json(*e.thread) : io::Json(nullptr);
  j["detail"] = e.detail;
  return j;
}

SessionEvent event_from_json(const io::Json& j) {
  SessionEvent e;
  e.t_ms = j.at("t_ms").get<Millis>();
  e.type = event_type_from_string(j.at("type").get<std::string>());
  if (j.contains("tool") && !j["tool"].is_null()) e.tool = tool_from_string(j["tool"].get<std::string>());
  if (j.contains("block") && !j["block"].is_null()) e.block = BlockIndex{j["block"].get<int>()};
  if (j.contains("thread") && !j["thread"].is_null()) e.thread = j["thread"].get<int>();
  e.detail = j.value("detail", std::string{});
  return e;
}

io::Json outcome_to_json(const SessionOutcome& o) {
  io::Json j;
  j["schema_version"] = kOutcomeSchemaVersion;
  j["utterance_id"] = o.utterance_id;
  j["strategy"] = std::string(to_string(o.strategy));
  j["speech_end_ms"] = o.speech_end_ms;
  j["blocks"] = o.blocks;
  io::Json bstar = io::Json::object();
  for (const auto& [tool, b] : o.b_star) bstar[std::string(to_string(tool))] = b.value;
  j["b_star"] = std::move(bstar);
  io::Json finals = io::Json::object();
  for (const auto& [tool, q] : o.final_queries) finals[std::string(to_string(tool))] = io::query_to_json(q);
  j["final_queries"] = std::move(finals);
  j["latency"] = io::Json{{"query_gen_ms", o.latency.query_gen_ms},
                          {"tool_results_ms", o.latency.tool_results_ms},
                          {"response_gen_ms", o.latency.response_gen_ms},
                          {"first_token_ms", o.latency.first_token_ms},
                          {"last_token_ms", o.latency.last_token_ms}};
  j["threads_spawned"] = o.threads_spawned;
  j["threads_cancelled"] = o.threads_cancelled;
  j["max_parallel_threads"] = o.max_parallel_threads;
  j["degraded"] = o.degraded;
  j["completed"] = o.completed;
  j["warnings"] = o.warnings;
  j["references"] = io::bundle_to_json(o.references);
  io::Json threads = io::Json::array();
  for (const auto& t : o.threads) {
    threads.push_back(io::Json{{"id", t.id},
                               {"tool", std::string(to_string(t.tool))},
                               {"block", t.block.value},
                               {"query", io::query_to_json(t.query)},
                               {"started_ms", t.started_ms},
                               {"fetched_ms", t.fetched_ms},
                               {"finishes_ms", t.finishes_ms},
                               {"ended_ms", t.ended_ms},
                               {"status", std::string(reflector::to_string(t.status))}});
  }
  j["threads"] = std::move(threads);
  io::Json events = io::Json::array();
  for (const auto& e : o.events) events.push_back(event_to_json(e));
  j["events"] = std::move(events);
  return j;
}

namespace {

CallStatus status_from_string(const std::string& s) {
  for (auto st : {CallStatus::pending, CallStatus::done, CallStatus::cancelled, CallStatus::failed}) {
    if (reflector::to_string(st) == s) return st;
  }
  throw InputError("unknown thread status '" + s + "'");
}

}  // namespace

SessionOutcome outcome_from_json(const io::Json& j) {
  try {
    SessionOutcome o;
    const int version = j.value("schema_version", kOutcomeSchemaVersion);
    if (version != kOutcomeSchemaVersion) {
      throw InputError("unsupported outcome schema_version " + std::to_string(version));
    }
    o.utterance_id = j.at("utterance_id").get<std::string>();
    o.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    o.speech_end_ms = j.at("speech_end_ms").get<Millis>();
    o.blocks = j.at("blocks").get<int>();
    for (const auto& [tool, b] : j.at("b_star").items()) {
      o.b_star[tool_from_string(tool)] = BlockIndex{b.get<int>()};
    }
    for (const auto& [tool, q] : j.at("final_queries").items()) {
      const Tool t = tool_from_string(tool);
      o.final_queries[t] = io::query_from_json(q, t);
    }
    const auto& l = j.at("latency");
    o.latency = LatencyBreakdown{l.at("query_gen_ms").get<Millis>(),
                                 l.at("tool_results_ms").get<Millis>(),
                                 l.at("response_gen_ms").get<Millis>(),
                                 l.at("first_token_ms").get<Millis>(),
                                 l.at("last_token_ms").get<Millis>()};
    o.threads_spawned = j.at("threads_spawned").get<int>();
    o.threads_cancelled = j.at("threads_cancelled").get<int>();
    o.max_parallel_threads = j.at("max_parallel_threads").get<int>();
    o.degraded = j.at("degraded").get<bool>();
    o.completed = j.at("completed").get<bool>();
    o.warnings = j.value("warnings", std::vector<std::string>{});
    const auto& r = j.at("references");
    o.references.web_chunks = r.at("web").get<std::vector<std::string>>();
    o.references.kg_answers = r.at("kg").get<std::vector<std::string>>();
    o.references.total_tokens = r.at("total_tokens").get<std::int64_t>();
    for (const auto& t : j.value("threads", io::Json::array())) {
      ToolCallThread th;
      th.id = t.at("id").get<int>();
      th.tool = tool_from_string(t.at("tool").get<std::string>());
      th.block = BlockIndex{t.at("block").get<int>()};
      th.query = io::query_from_json(t.at("query"), th.tool);
      th.started_ms = t.at("started_ms").get<Millis>();
      th.fetched_ms = t.at("fetched_ms").get<Millis>();
      th.finishes_ms = t.at("finishes_ms").get<Millis>();
      th.ended_ms = t.at("ended_ms").get<Millis>();
      th.status = status_from_string(t.at("status").get<std::string>());
      o.threads.push_back(std::move(th));
    }
    for (const auto& e : j.value("events", io::Json::array())) o.events.push_back(event_from_json(e));
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed outcome: ") + e.what());
  }
}

void write_outcomes(const std::vector<SessionOutcome>& outcomes,
                    const std::filesystem::path& path) {
  std::string out;
  for (const auto& o : outcomes) out += outcome_to_json(o).dump() + "\n";
  io::write_file_atomic(path, out);
}

std::vector<SessionOutcome> read_outcomes(const std::filesystem::path& path) {
  std::vector<SessionOutcome> out;
  io::for_each_jsonl(path, [&](const io::Json& j, std::size_t) { out.push_back(outcome_from_json(j)); });
  return out;
}

void write_event_log(const std::vector<SessionOutcome>& outcomes,
                     const std::filesystem::path& path) {
  std::string out;
  for (const auto& o : outcomes) {
    for (const auto& e : o.events) {
      io::Json j;
      j["utterance_id"] = o.utterance_id;
      const auto ej = event_to_json(e);
      for (const auto& [k, v] : ej.items()) j[k] = v;
      out += j.dump() + "\n";
    }
  }
  io::write_file_atomic(path, out);
}

namespace {

io::Json delay_to_json(const Delay& d) {
  if (d.is_constant()) return d.samples().front();
  return d.samples();
}

Delay delay_from_json(const io::Json& j, const char* name) {
  if (j.is_number_integer()) return Delay(j.get<Millis>());
  if (j.is_array() && !j.empty()) return Delay::empirical(j.get<std::vector<Millis>>());
  throw InputError(std::string("latency '") + name + "' must be an integer or a non-empty array");
}

}  // namespace

io::Json latency_model_to_json(const LatencyModel& m) {
  return io::Json{{"query_gen", delay_to_json(m.query_gen)},
                  {"web_fetch", delay_to_json(m.web_fetch)},
                  {"chunk_rerank", delay_to_json(m.chunk_rerank)},
                  {"kg_lookup", delay_to_json(m.kg_lookup)},
                  {"response_gen", delay_to_json(m.response_gen)},
                  {"response_tail", delay_to_json(m.response_tail)},
                  {"tool_failure_prob", m.tool_failure_prob},
                  {"seed", m.seed}};
}

LatencyModel latency_model_from_json(const io::Json& j) {
  if (!j.is_object()) throw InputError("latency model must be a JSON object");
  LatencyModel m;
  static const std::vector<std::string> kKnown = {"query_gen",    "web_fetch",     "chunk_rerank",
                                                  "kg_lookup",    "response_gen",  "response_tail",
                                                  "tool_failure_prob", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end()) {
      throw InputError("unknown latency field '" + key + "'");
    }
  }
  if (j.contains("query_gen")) m.query_gen = delay_from_json(j["query_gen"], "query_gen");
  if (j.contains("web_fetch")) m.web_fetch = delay_from_json(j["web_fetch"], "web_fetch");
  if (j.contains("chunk_rerank")) m.chunk_rerank = delay_from_json(j["chunk_rerank"], "chunk_rerank");
  if (j.contains("kg_lookup")) m.kg_lookup = delay_from_json(j["kg_lookup"], "kg_lookup");
  if (j.contains("response_gen")) m.response_gen = delay_from_json(j["response_gen"], "response_gen");
  if (j.contains("response_tail")) m.response_tail = delay_from_json(j["response_tail"], "response_tail");
  if (j.contains("tool_failure_prob")) m.tool_failure_prob = j["tool_failure_prob"].get<double>();
  if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();
  m.validate();
  return m;
}

}  // namespace streamrag::orch
