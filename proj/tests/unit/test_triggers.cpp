#include <doctest.h>

#include <random>

#include "streamrag/json_io.hpp"
#include "streamrag/labeling.hpp"
#include "streamrag/trace.hpp"
#include "streamrag/triggers.hpp"
#include "synthetic.hpp"

using namespace streamrag;
using namespace streamrag::triggers;

namespace {

struct LabelFixture {
  std::vector<UtteranceTrace> traces = io::read_traces(testing::fixture("label_traces.jsonl"));
  retrieval::DocIndex index{io::read_corpus(testing::fixture("label_corpus.jsonl"))};
  labeling::SimilarityContext ctx{&index, 50, 5, true};

  const UtteranceTrace& trace(const std::string& id) const {
    for (const auto& t : traces) {
      if (t.utterance_id == id) return t;
    }
    throw std::out_of_range(id);
  }
};

const LabelFixture& fx() {
  static const LabelFixture f;
  return f;
}

Block block_with_prefix(const UtteranceTrace& t, int b, Millis block_ms) {
  return blocks_of(t, block_ms).at(static_cast<std::size_t>(b - 1));
}

class ThrowingGenerator final : public QueryGenerator {
 public:
  GeneratedQueries generate(const GenerationRequest&) const override {
    throw GenerationError("model offline");
  }
};

class SwappedGenerator final : public QueryGenerator {
 public:
  GeneratedQueries generate(const GenerationRequest&) const override {
    return {ToolQuery::kg(KgQuery(KgDomain::other, {{"main_entity", "x"}})), ToolQuery::web("x")};
  }
};

}  // namespace

TEST_SUITE("triggers") {
  TEST_CASE("fixed interval: every block fires for both tools") {
    const auto& t = fx().trace("rare-beauty");
    ScriptedQueryGenerator gen(t, fx().ctx);
    auto blocks = blocks_of(t, 500);
    REQUIRE(blocks.size() == 5);
    auto log = replay(gen, blocks, Strategy::fixed_interval);
    REQUIRE(log.size() == 5);
    for (const auto& d : log) {
      CHECK(d.web.fires());
      CHECK(d.kg.fires());
    }
    CHECK(log[2].web.query == ToolQuery::web("Who founded Rare Beauty"));
  }

  TEST_CASE("fixed interval: identical prefixes give identical queries") {
    const auto& t = fx().trace("darius-miles");
    ScriptedQueryGenerator gen(t, fx().ctx);
    auto blocks = blocks_of(t, 500);
    for (std::size_t a = 0; a < blocks.size(); ++a) {
      for (std::size_t b = a + 1; b < blocks.size(); ++b) {
        if (blocks[a].prefix_words != blocks[b].prefix_words) continue;
        auto da = fixed_interval_step(gen, blocks[a], 0);
        auto db = fixed_interval_step(gen, blocks[b], 0);
        CHECK(da.web == db.web);
        CHECK(da.kg == db.kg);
      }
    }
  }

  TEST_CASE("fixed interval: generator failures become failed actions") {
    const auto& t = fx().trace("rare-beauty");
    auto blk = block_with_prefix(t, 1, 500);
    auto d = fixed_interval_step(ThrowingGenerator{}, blk, 10);
    CHECK(d.web.kind == TriggerAction::Kind::failed);
    CHECK(d.kg.kind == TriggerAction::Kind::failed);
    CHECK(d.fired_at_ms == 10);
    auto swapped = fixed_interval_step(SwappedGenerator{}, blk, 0);
    CHECK(swapped.web.kind == TriggerAction::Kind::failed);

    UtteranceTrace missing = t;
    missing.scripted_queries.erase(2);
    ScriptedQueryGenerator gen(missing, fx().ctx);
    CHECK(fixed_interval_step(gen, blk, 0).web.kind == TriggerAction::Kind::failed);
  }

  TEST_CASE("model trigger: NO_QUERY once the web query has settled") {
    const auto& t = fx().trace("rare-beauty");
    ScriptedQueryGenerator gen(t, fx().ctx);
    auto blk = block_with_prefix(t, 4, 500);
    REQUIRE(blk.prefix_text == "Who founded rare beauty in");
    auto d = model_trigger_step(gen, blk, ToolQuery::web("Who founded Rare Beauty"),
                                ToolQuery::none(), 0);
    CHECK(d.web.kind == TriggerAction::Kind::no_query);
  }

  TEST_CASE("model trigger: the recorded misfire on 'Who founded rare'") {
    const auto& t = fx().trace("rare-beauty");
    ScriptedQueryGenerator gen(t, fx().ctx);
    auto blk = block_with_prefix(t, 2, 500);
    REQUIRE(blk.prefix_text == "Who founded rare");
    auto d = model_trigger_step(gen, blk, ToolQuery::web("Who founded what"), ToolQuery::none(), 0);
    REQUIRE(d.web.fires());
    CHECK(d.web.query == ToolQuery::web("Red Bull founder"));
  }

  TEST_CASE("model trigger: first block with nothing running fires") {
    const auto& t = fx().trace("darius-miles");
    ScriptedQueryGenerator gen(t, fx().ctx);
    auto d = model_trigger_step(gen, block_with_prefix(t, 1, 500), ToolQuery::none(),
                                ToolQuery::none(), 0);
    CHECK(d.web.fires());
    CHECK(d.kg.fires());
  }

  TEST_CASE("model trigger: generator failure keeps the running call") {
    const auto& t = fx().trace("rare-beauty");
    auto d = model_trigger_step(ThrowingGenerator{}, block_with_prefix(t, 1, 500),
                                ToolQuery::web("q"), ToolQuery::none(), 0);
    CHECK(d.web.kind == TriggerAction::Kind::no_query);
    CHECK(d.web.reason.find("model offline") != std::string::npos);
    auto swapped = model_trigger_step(SwappedGenerator{}, block_with_prefix(t, 1, 500),
                                      ToolQuery::none(), ToolQuery::none(), 0);
    CHECK(swapped.web.kind == TriggerAction::Kind::no_query);
    CHECK_FALSE(swapped.web.reason.empty());
  }

  TEST_CASE("trigger properties over random traces") {
    std::mt19937_64 rng(17);
    auto kg = testing::synthetic_kg();
    const retrieval::DocIndex index(testing::synthetic_corpus(200));
    labeling::SimilarityContext ctx{&index, 50, 5, true};
    for (int i = 0; i < 150; ++i) {
      auto t = testing::random_trace(rng, "p" + std::to_string(i), 200, kg);
      ScriptedQueryGenerator gen(t, ctx);
      for (Millis block_ms : {500, 1000}) {
        auto blocks = blocks_of(t, block_ms);
        auto fixed = replay(gen, blocks, Strategy::fixed_interval);
        CHECK(fixed.size() == blocks.size());
        for (const auto& d : fixed) {
          CHECK(d.web.fires());
          CHECK(d.kg.fires());
        }
        CHECK(replay(gen, blocks, Strategy::fixed_interval) == fixed);

        auto model = replay(gen, blocks, Strategy::model_triggered);
        CHECK(replay(gen, blocks, Strategy::model_triggered) == model);
        // prev is reconstructible from the log: the last fire before each block.
        for (Tool tool : kAllTools) {
          ToolQuery prev;
          for (std::size_t b = 0; b < model.size(); ++b) {
            const auto& action = model[b].action(tool);
            CHECK(action.kind != TriggerAction::Kind::failed);
            auto again = model_trigger_step(gen, blocks[b], tool == Tool::web ? prev : ToolQuery{},
                                            tool == Tool::kg ? prev : ToolQuery{}, 0);
            CHECK(again.action(tool) == action);
            if (action.fires()) prev = action.query;
          }
          CHECK(model.front().action(tool).fires());
        }
      }
    }
  }
}
