#include <doctest.h>

#include <random>

#include "streamrag/config.hpp"
#include "streamrag/json_io.hpp"
#include "streamrag/sim_clock.hpp"
#include "streamrag/trace.hpp"
#include "synthetic.hpp"

using namespace streamrag;

namespace {

UtteranceTrace words_trace(std::vector<Word> words) {
  UtteranceTrace t;
  t.utterance_id = "u";
  t.words = std::move(words);
  return t;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("sim clock: advancing an empty queue only moves time") {
    SimClock<int> clock;
    CHECK(clock.advance(500).empty());
    CHECK(clock.now() == 500);
  }

  TEST_CASE("sim clock: same-instant events fire in insertion order") {
    SimClock<char> clock;
    clock.schedule(300, 'a');
    clock.schedule(700, 'c');
    clock.schedule(300, 'b');
    auto fired = clock.advance(500);
    REQUIRE(fired.size() == 2);
    CHECK(fired[0].event == 'a');
    CHECK(fired[1].event == 'b');
    CHECK(clock.pending() == 1);
    CHECK(clock.next_fire_time() == 700);
  }

  TEST_CASE("sim clock: query generation event fires exactly at 590") {
    SimClock<int> clock;
    clock.schedule_after(590, 1);
    CHECK(clock.advance(589).empty());
    auto fired = clock.advance(590);
    REQUIRE(fired.size() == 1);
    CHECK(fired[0].fire_at_ms == 590);
  }

  TEST_CASE("sim clock: time never runs backwards") {
    SimClock<int> clock;
    clock.advance(100);
    CHECK_THROWS_AS(clock.advance(50), std::logic_error);
    CHECK_THROWS_AS(clock.schedule(10, 1), std::logic_error);
    CHECK_THROWS_AS(clock.schedule_after(-1, 1), std::logic_error);
  }

  TEST_CASE("sim clock property: random schedules pop in (time, insertion) order") {
    std::mt19937_64 rng(11);
    for (int round = 0; round < 50; ++round) {
      SimClock<int> clock;
      std::uniform_int_distribution<Millis> at(0, 40);
      std::vector<std::pair<Millis, int>> expected;
      for (int i = 0; i < 100; ++i) {
        Millis t = at(rng);
        clock.schedule(t, i);
        expected.emplace_back(t, i);
      }
      std::stable_sort(expected.begin(), expected.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      Millis last = 0;
      for (const auto& [t, i] : expected) {
        auto s = clock.step();
        REQUIRE(s.has_value());
        CHECK(s->fire_at_ms == t);
        CHECK(s->event == i);
        CHECK(clock.now() >= last);
        last = clock.now();
      }
      CHECK(clock.empty());
    }
  }

  TEST_CASE("blocks: a word straddling a boundary waits for the next block") {
    auto t = words_trace({{"who", 0, 300}, {"founded", 350, 800}});
    auto blocks = blocks_of(t, 500);
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].prefix_text == "who");
    CHECK(blocks[1].prefix_text == "who founded");
    CHECK(blocks[1].ready_ms == 800);
    CHECK(blocks[1].window_end_ms == 1000);
  }

  TEST_CASE("blocks: single short word gives one block") {
    auto blocks = blocks_of(words_trace({{"hello", 0, 400}}), 500);
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].prefix_text == "hello");
    CHECK(blocks[0].prefix_words == 1);
  }

  TEST_CASE("blocks: a word ending exactly on the edge belongs to that block") {
    auto blocks = blocks_of(words_trace({{"a", 0, 500}, {"b", 510, 1000}}), 500);
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].prefix_words == 1);
    CHECK(blocks[1].prefix_words == 2);
  }

  TEST_CASE("blocks: Rare Beauty fixture prefixes") {
    auto traces = io::read_traces(testing::fixture("label_traces.jsonl"));
    const auto& rb = traces.at(0);
    REQUIRE(rb.utterance_id == "rare-beauty");
    auto blocks = blocks_of(rb, 500);
    std::vector<std::string> prefixes;
    for (const auto& b : blocks) prefixes.push_back(b.prefix_text);
    CHECK(prefixes == std::vector<std::string>{"Who founded", "Who founded rare",
                                               "Who founded rare beauty",
                                               "Who founded rare beauty in",
                                               "Who founded rare beauty in 2019?"});
    CHECK(missing_scripted_prefixes(rb, 500).empty());
  }

  TEST_CASE("blocks: invalid input") {
    CHECK_THROWS_AS(blocks_of(words_trace({}), 500), InputError);
    CHECK_THROWS_AS(blocks_of(words_trace({{"a", 0, 100}}), 0), InputError);
    CHECK_THROWS_AS(validate_trace(words_trace({{"a", 0, 300}, {"b", 200, 400}})), InputError);
    CHECK_THROWS_AS(validate_trace(words_trace({{"a", 50, 20}})), InputError);
  }

  TEST_CASE("blocks property: prefix monotonicity and window coverage") {
    std::mt19937_64 rng(5);
    auto kg = testing::synthetic_kg();
    for (int i = 0; i < 200; ++i) {
      auto t = testing::random_trace(rng, "t" + std::to_string(i), 200, kg);
      for (Millis block_ms : {250, 500, 1000}) {
        auto blocks = blocks_of(t, block_ms);
        const Millis end = t.words.back().end_ms;
        CHECK(blocks.size() == static_cast<std::size_t>((end + block_ms - 1) / block_ms));
        Millis covered = 0;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
          CHECK(blocks[b].index.value == static_cast<int>(b) + 1);
          // Windows are (covered, edge]; consecutive with no gap or overlap.
          CHECK(blocks[b].window_end_ms == covered + block_ms);
          covered = blocks[b].window_end_ms;
          for (int w = 0; w < blocks[b].prefix_words; ++w) {
            CHECK(t.words[static_cast<std::size_t>(w)].end_ms <= blocks[b].window_end_ms);
          }
          if (b + 1 < blocks.size()) {
            const auto& next = blocks[b + 1].prefix_text;
            CHECK(blocks[b].prefix_words <= blocks[b + 1].prefix_words);
            CHECK(next.compare(0, blocks[b].prefix_text.size(), blocks[b].prefix_text) == 0);
          }
        }
        CHECK(covered >= end);
        CHECK(blocks.back().prefix_words == static_cast<int>(t.words.size()));
        CHECK(blocks.back().ready_ms == end);
      }
    }
  }

  TEST_CASE("queries: variants and invariants") {
    CHECK(ToolQuery().is_none());
    CHECK_THROWS_AS(ToolQuery::web(""), InputError);
    CHECK_THROWS_AS(ToolQuery::web("   "), InputError);
    CHECK_THROWS_AS(ToolQuery::none().tool(), ToolMismatch);
    CHECK(ToolQuery::none().belongs_to(Tool::kg));
    CHECK_FALSE(ToolQuery::web("x").belongs_to(Tool::kg));
    CHECK_THROWS_AS(ToolQuery::web("x").kg_query(), ToolMismatch);
    CHECK(ToolQuery::none().describe() == "NO_QUERY");
  }

  TEST_CASE("kg queries: per-domain keys and canonical form") {
    CHECK_THROWS_AS(KgQuery(KgDomain::music, {{"team", "x"}}), InputError);
    KgQuery a(KgDomain::music,
              {{"artist_name", "  Red Hot Chili Peppers "}, {"artist_aspect", "Member"}});
    KgQuery b(KgDomain::music,
              {{"artist_aspect", "member"}, {"artist_name", "red hot chili peppers"}});
    CHECK(a != b);
    CHECK(a.canonical() == b.canonical());
    CHECK(a.canonical() == a.canonical().canonical());
  }

  TEST_CASE("config: validation and defaults") {
    CHECK(default_config(Strategy::model_triggered).block_ms == 500);
    CHECK(default_config(Strategy::fixed_interval).block_ms == 1000);
    auto c = default_config(Strategy::open_book);
    CHECK(c.top_docs == 50);
    CHECK(c.reflect_top_k == 5);
    CHECK(c.web_kg_ratio == Ratio{2, 1});
    CHECK(c.negative_sample_prob == doctest::Approx(0.1));
    CHECK_NOTHROW(c.validate());
    c.block_ms = 0;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = {};
    c.negative_sample_prob = 1.5;
    CHECK_THROWS_AS(c.validate(), InputError);
    c = {};
    c.ref_length_tokens = -1;
    CHECK_THROWS_AS(c.validate(), InputError);
    CHECK_THROWS_AS(strategy_from_string("eager"), InputError);
    CHECK(ratio_from_string("3:2") == Ratio{3, 2});
    CHECK_THROWS_AS(ratio_from_string("3-2"), InputError);
  }

  TEST_CASE("config: unknown strategy message lists the valid names") {
    try {
      strategy_from_string("eager");
      FAIL("expected an error");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("model_triggered") != std::string::npos);
    }
  }

  TEST_CASE("json: config round trip and unknown keys") {
    auto c = default_config(Strategy::fixed_interval);
    c.web_kg_ratio = {3, 1};
    c.rng_seed = 99;
    CHECK(io::config_from_json(io::config_to_json(c)) == c);
    CHECK_THROWS_AS(io::config_from_json(io::Json{{"blok_ms", 5}}), InputError);
    CHECK_THROWS_AS(io::config_from_json(io::Json{{"block_ms", -5}}), InputError);
  }

  TEST_CASE("json: trace round trip through a file") {
    std::mt19937_64 rng(3);
    auto kg = testing::synthetic_kg();
    std::vector<UtteranceTrace> traces;
    for (int i = 0; i < 20; ++i) traces.push_back(testing::random_trace(rng, std::to_string(i), 200, kg));
    auto dir = testing::scratch_dir("core-json");
    io::write_traces(traces, dir / "t.jsonl");
    CHECK(io::read_traces(dir / "t.jsonl") == traces);
  }

  TEST_CASE("json: parse errors carry the line number") {
    auto dir = testing::scratch_dir("core-json-bad");
    io::write_file_atomic(dir / "bad.jsonl", "{\"doc_id\":\"a\",\"text\":\"x\"}\n{oops\n");
    try {
      io::read_corpus(dir / "bad.jsonl");
      FAIL("expected an error");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }

  TEST_CASE("json: queries") {
    CHECK(io::query_from_json("NO_QUERY", Tool::web).is_none());
    CHECK(io::query_from_json("abc", Tool::web) == ToolQuery::web("abc"));
    CHECK_THROWS(io::query_from_json("abc", Tool::kg));
    auto q = io::query_from_json(io::Json{{"domain", "music"}, {"artist_name", "X"}}, Tool::kg);
    CHECK(q.kg_query().attributes().at("artist_name") == "X");
    CHECK(io::query_to_json(q) == io::Json{{"domain", "music"}, {"artist_name", "X"}});
  }
}
