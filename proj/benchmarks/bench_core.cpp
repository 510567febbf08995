#include <benchmark/benchmark.h>

#include <random>

#include "streamrag/orchestrator.hpp"
#include "streamrag/retrieval.hpp"

using namespace streamrag;

namespace {

const std::vector<std::string> kWords = {"river", "engine", "harvest", "signal", "orbit", "ledger",
                                         "canvas", "protein", "tariff", "glacier", "melody", "voltage",
                                         "archive", "stadium", "lantern", "quartz"};

std::vector<retrieval::Document> corpus(std::size_t n) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> word(0, kWords.size() - 1);
  std::uniform_int_distribution<int> len(40, 300);
  std::vector<retrieval::Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    for (int w = len(rng); w > 0; --w) text += kWords[word(rng)] + " ";
    text += "marker" + std::to_string(i);
    docs.push_back({"doc-" + std::to_string(i), text});
  }
  return docs;
}

UtteranceTrace trace(int words) {
  UtteranceTrace t;
  t.utterance_id = "bench";
  for (int i = 0; i < words; ++i) {
    t.words.push_back({kWords[static_cast<std::size_t>(i) % kWords.size()], i * 400, i * 400 + 300});
  }
  const KgQuery kg(KgDomain::music, {{"artist_name", "Nobody"}, {"artist_aspect", "genre"}});
  for (int n = 0; n <= words; ++n) {
    std::string q;
    for (int i = 0; i < std::min(n, 4); ++i) q += kWords[static_cast<std::size_t>(i)] + " ";
    q += "marker" + std::to_string(n == words ? 7 : n);
    t.scripted_queries[n] = {ToolQuery::web(q), ToolQuery::kg(kg)};
  }
  return t;
}

void BM_WebSearch(benchmark::State& state) {
  const retrieval::DocIndex index(corpus(static_cast<std::size_t>(state.range(0))));
  const auto q = ToolQuery::web("river signal orbit marker17");
  for (auto _ : state) benchmark::DoNotOptimize(retrieval::web_search(index, q, 50));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WebSearch)->Arg(200)->Arg(2000)->Arg(20000);

void BM_RunSession(benchmark::State& state) {
  const retrieval::DocIndex index(corpus(2000));
  const retrieval::KgStore kg;
  const orch::Backends backends{&index, &kg};
  const auto t = trace(static_cast<int>(state.range(1)));
  const auto cfg = default_config(static_cast<Strategy>(state.range(0)));
  const auto latency = orch::LatencyModel::constant(590, 2780, 2520);
  for (auto _ : state) benchmark::DoNotOptimize(orch::run_session(t, cfg, backends, latency));
  state.SetLabel(std::string(to_string(cfg.strategy)));
}
BENCHMARK(BM_RunSession)
    ->ArgsProduct({{static_cast<int>(Strategy::open_book), static_cast<int>(Strategy::fixed_interval),
                    static_cast<int>(Strategy::model_triggered)},
                   {8, 24}});

}  // namespace

BENCHMARK_MAIN();
