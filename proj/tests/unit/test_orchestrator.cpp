#include <doctest.h>

#include <random>

#include "streamrag/json_io.hpp"
#include "streamrag/orchestrator.hpp"
#include "streamrag/trace.hpp"
#include "synthetic.hpp"

using namespace streamrag;
using namespace streamrag::orch;

namespace {

struct Synthetic {
  retrieval::DocIndex index{testing::synthetic_corpus(200)};
  testing::KgFixture kg_fixture = testing::synthetic_kg();
  retrieval::KgStore kg{kg_fixture.entries};
  Backends backends{&index, &kg};
};

const Synthetic& syn() {
  static const Synthetic s;
  return s;
}

struct Labels {
  retrieval::DocIndex index{io::read_corpus(testing::fixture("label_corpus.jsonl"))};
  retrieval::KgStore kg = io::read_kg_store(testing::fixture("label_kg.json"));
  Backends backends{&index, &kg};
};

const Labels& labels() {
  static const Labels l;
  return l;
}

std::vector<UtteranceTrace> random_traces(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::vector<UtteranceTrace> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(testing::random_trace(rng, "utt-" + std::to_string(i), 200, syn().kg_fixture));
  }
  return out;
}

const LatencyModel kTable = LatencyModel::constant(590, 2780, 2520);

UtteranceTrace early_fire() { return io::read_traces(testing::fixture("latency_trace.jsonl")).at(0); }

UtteranceTrace uniform_trace(Millis end_ms) {
  UtteranceTrace t;
  t.utterance_id = "uniform";
  t.words = {{"a", 0, 400}, {"b", 900, 1400}, {"c", 1700, end_ms}};
  for (int n = 0; n <= 3; ++n) {
    t.scripted_queries[n] = {ToolQuery::web(testing::unique_phrase(7)),
                             ToolQuery::kg(syn().kg_fixture.known.front())};
  }
  return t;
}

void check_conservation(const SessionOutcome& o) {
  CHECK(o.completed);
  CHECK(o.latency.last_token_ms >= o.latency.first_token_ms);
  CHECK(o.latency.query_gen_ms >= 0);
  CHECK(o.latency.tool_results_ms >= 0);
  CHECK(o.latency.response_gen_ms >= 0);
  CHECK(o.latency.first_token_ms == o.latency.total_ms());
  CHECK(o.threads_spawned == static_cast<int>(o.threads.size()));
  int cancelled = 0;
  for (const auto& t : o.threads) {
    CHECK(t.status != CallStatus::pending);
    CHECK(t.finishes_ms >= t.started_ms);
    CHECK(t.ended_ms >= t.started_ms);
    CHECK(t.ended_ms <= t.finishes_ms);
    if (t.status == CallStatus::cancelled) ++cancelled;
  }
  CHECK(cancelled == o.threads_cancelled);
  for (std::size_t i = 1; i < o.events.size(); ++i) CHECK(o.events[i - 1].t_ms <= o.events[i].t_ms);
}

}  // namespace

TEST_SUITE("orchestrator") {
  TEST_CASE("delays: constants, empirical draws and validation") {
    std::mt19937_64 rng(1);
    CHECK(Delay(590).sample(rng) == 590);
    auto d = Delay::empirical({1, 2, 3});
    for (int i = 0; i < 50; ++i) {
      auto s = d.sample(rng);
      CHECK((s >= 1 && s <= 3));
    }
    CHECK_THROWS_AS(Delay::empirical({}), InputError);
    LatencyModel m;
    m.query_gen = Delay::empirical({5, -1});
    CHECK_THROWS_AS(m.validate(), InputError);
    m = {};
    m.tool_failure_prob = 2;
    CHECK_THROWS_AS(m.validate(), InputError);
  }

  TEST_CASE("closed book: no tool time") {
    auto o = run_session(early_fire(), default_config(Strategy::closed_book), labels().backends, kTable);
    auto l = first_token_latency(o);
    CHECK(l.query_gen_ms == 0);
    CHECK(l.tool_results_ms == 0);
    CHECK(l.response_gen_ms == 2520);
    CHECK(o.threads.empty());
    CHECK_FALSE(o.degraded);
    CHECK(o.references.total_tokens == 0);
  }

  TEST_CASE("open book: 0.59 + 2.78 + 2.52") {
    auto o = run_session(early_fire(), default_config(Strategy::open_book), labels().backends, kTable);
    auto l = first_token_latency(o);
    CHECK(l.query_gen_ms == 590);
    CHECK(l.tool_results_ms == 2780);
    CHECK(l.response_gen_ms == 2520);
    CHECK(l.first_token_ms == 5890);
    CHECK(o.threads_spawned == 2);
    CHECK(o.max_parallel_threads == 1);
    CHECK(o.references.total_tokens > 0);
    check_conservation(o);
  }

  TEST_CASE("model triggered: a fire 0.58 s ahead of the final decision saves 0.58 s") {
    auto o = run_session(early_fire(), default_config(Strategy::model_triggered), labels().backends,
                         kTable);
    auto l = first_token_latency(o);
    CHECK(l.query_gen_ms == 590);
    CHECK(l.tool_results_ms == 2200);
    CHECK(l.first_token_ms == 5310);
    CHECK(o.max_parallel_threads == 1);
    check_conservation(o);
  }

  TEST_CASE("fixed interval: identical queries everywhere select block 1") {
    const auto cfg = default_config(Strategy::fixed_interval);
    for (Millis end : {2600, 2900, 3000}) {
      auto t = uniform_trace(end);
      auto o = run_session(t, cfg, syn().backends, kTable);
      CHECK(o.blocks == 3);
      CHECK(o.b_star.at(Tool::web) == BlockIndex{1});
      CHECK(o.b_star.at(Tool::kg) == BlockIndex{1});
      // Hand timeline: block 1 fires at 1000 + 590 and runs 2780 ms; the last
      // block's generation ends at end + 590.
      const Millis tool_wait = std::max<Millis>(0, 2780 - (end - 1000));
      CHECK(o.latency.query_gen_ms == 590);
      CHECK(o.latency.tool_results_ms == tool_wait);
      CHECK(o.threads_spawned == 6);
      CHECK(o.threads_cancelled == 4);
      check_conservation(o);
    }
  }

  TEST_CASE("fixed interval: missing scripted prefixes are an input error") {
    auto t = uniform_trace(2600);
    t.scripted_queries.erase(2);
    CHECK_THROWS_AS(run_session(t, default_config(Strategy::fixed_interval), syn().backends, kTable),
                    InputError);
  }

  TEST_CASE("sessions need backends for tool strategies") {
    CHECK_THROWS_AS(run_session(early_fire(), default_config(Strategy::open_book), Backends{}, kTable),
                    InputError);
    CHECK_NOTHROW(run_session(early_fire(), default_config(Strategy::closed_book), Backends{}, kTable));
  }

  TEST_CASE("first token latency refuses incomplete sessions") {
    SessionOutcome o;
    CHECK_THROWS_AS(first_token_latency(o), std::logic_error);
  }

  TEST_CASE("every call failing degrades to a closed-book answer") {
    LatencyModel m = kTable;
    m.tool_failure_prob = 1.0;
    for (auto s : {Strategy::open_book, Strategy::fixed_interval, Strategy::model_triggered}) {
      auto o = run_session(uniform_trace(2600), default_config(s), syn().backends, m);
      CHECK(o.degraded);
      CHECK(o.completed);
      CHECK(o.references.total_tokens == 0);
      CHECK_FALSE(o.warnings.empty());
      check_conservation(o);
    }
  }

  TEST_CASE("session properties over random traces") {
    auto traces = random_traces(31, 120);
    LatencyModel noisy;
    noisy.query_gen = Delay::empirical({300, 590, 850});
    noisy.web_fetch = Delay::empirical({500, 780, 1500});
    noisy.chunk_rerank = Delay::empirical({1200, 2000, 3400});
    noisy.kg_lookup = Delay::empirical({400, 1000, 2500});
    noisy.tool_failure_prob = 0.05;
    noisy.seed = 3;
    for (auto s : {Strategy::open_book, Strategy::fixed_interval, Strategy::model_triggered}) {
      const auto cfg = default_config(s);
      for (const auto& t : traces) {
        auto o = run_session(t, cfg, syn().backends, noisy);
        check_conservation(o);
        CHECK(run_session(t, cfg, syn().backends, noisy) == o);
        CHECK(o.references.total_tokens <= cfg.ref_length_tokens);
        if (s == Strategy::model_triggered) CHECK(o.max_parallel_threads <= 1);
        if (s == Strategy::fixed_interval) {
          for (Tool tool : kAllTools) {
            int per_tool = 0;
            for (const auto& th : o.threads) per_tool += th.tool == tool;
            CHECK(per_tool == o.blocks);
            if (o.b_star.contains(tool)) {
              CHECK(o.b_star.at(tool).value >= 1);
              CHECK(o.b_star.at(tool).value <= o.blocks);
            }
          }
          CHECK(o.max_parallel_threads <= o.blocks);
        }
      }
    }
  }

  TEST_CASE("batch: order independence, single item, thread totals") {
    auto traces = random_traces(77, 100);
    const auto cfg = default_config(Strategy::fixed_interval);
    auto items = run_batch(traces, cfg, syn().backends, kTable, 4);
    REQUIRE(items.size() == traces.size());
    int spawned = 0;
    int expected = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      REQUIRE(items[i].ok());
      CHECK(items[i].utterance_id == traces[i].utterance_id);
      spawned += items[i].outcome->threads_spawned;
      expected += 2 * static_cast<int>(blocks_of(traces[i], cfg.block_ms).size());
    }
    CHECK(spawned == expected);

    auto reversed = traces;
    std::reverse(reversed.begin(), reversed.end());
    auto items_rev = run_batch(reversed, cfg, syn().backends, kTable, 1);
    for (std::size_t i = 0; i < items.size(); ++i) {
      CHECK(*items_rev[items.size() - 1 - i].outcome == *items[i].outcome);
    }

    auto single = run_batch({traces[5]}, cfg, syn().backends, kTable);
    CHECK(*single.at(0).outcome == run_session(traces[5], cfg, syn().backends, kTable));
  }

  TEST_CASE("batch: a bad trace records its error and the rest run") {
    auto traces = random_traces(5, 3);
    traces[1].words.clear();
    auto items = run_batch(traces, default_config(Strategy::open_book), syn().backends, kTable, 2);
    CHECK(items[0].ok());
    CHECK_FALSE(items[1].ok());
    CHECK_FALSE(items[1].error.empty());
    CHECK(items[2].ok());
  }

  TEST_CASE("seeds: latency seed changes draws, same seed repeats them") {
    auto traces = random_traces(9, 20);
    LatencyModel a;
    a.query_gen = Delay::empirical({100, 200, 300, 400, 500, 600, 700});
    LatencyModel b = a;
    b.seed = 1;
    bool differs = false;
    for (const auto& t : traces) {
      auto cfg = default_config(Strategy::model_triggered);
      auto x = run_session(t, cfg, syn().backends, a);
      CHECK(x == run_session(t, cfg, syn().backends, a));
      differs = differs || !(x == run_session(t, cfg, syn().backends, b));
    }
    CHECK(differs);
  }

  TEST_CASE("json: outcomes, events and latency models round trip") {
    auto traces = random_traces(12, 10);
    std::vector<SessionOutcome> outs;
    for (auto s : {Strategy::open_book, Strategy::fixed_interval, Strategy::model_triggered}) {
      for (const auto& t : traces) outs.push_back(run_session(t, default_config(s), syn().backends, kTable));
    }
    for (const auto& o : outs) {
      CHECK(outcome_from_json(outcome_to_json(o)) == o);
      for (const auto& e : o.events) CHECK(event_from_json(event_to_json(e)) == e);
    }
    auto dir = testing::scratch_dir("orch-json");
    write_outcomes(outs, dir / "o.jsonl");
    CHECK(read_outcomes(dir / "o.jsonl") == outs);
    write_event_log(outs, dir / "e.jsonl");
    std::size_t lines = 0;
    io::for_each_jsonl(dir / "e.jsonl", [&](const io::Json& j, std::size_t) {
      CHECK(j.contains("utterance_id"));
      ++lines;
    });
    std::size_t events = 0;
    for (const auto& o : outs) events += o.events.size();
    CHECK(lines == events);

    LatencyModel m;
    m.kg_lookup = Delay::empirical({10, 20});
    m.tool_failure_prob = 0.25;
    m.seed = 4;
    CHECK(latency_model_from_json(latency_model_to_json(m)) == m);
    CHECK_THROWS_AS(latency_model_from_json(io::Json{{"querygen", 5}}), InputError);
    CHECK_THROWS_AS(event_type_from_string("exploded"), InputError);
  }
}
