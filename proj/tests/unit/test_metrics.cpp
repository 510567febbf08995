#include <doctest.h>

#include <random>

#include "streamrag/metrics.hpp"
#include "synthetic.hpp"

using namespace streamrag;
using namespace streamrag::metrics;

namespace {

orch::SessionOutcome outcome(const std::string& id, Strategy s, Millis qg, Millis tr, Millis rg,
                             int threads = 1) {
  orch::SessionOutcome o;
  o.utterance_id = id;
  o.strategy = s;
  o.completed = true;
  o.latency = {qg, tr, rg, qg + tr + rg, qg + tr + rg + 1000};
  o.max_parallel_threads = threads;
  return o;
}

std::vector<Judgment> judgments(const std::string& system, int acc, int hal, int miss) {
  std::vector<Judgment> out;
  int id = 0;
  auto add = [&](Verdict v, int n) {
    for (int i = 0; i < n; ++i) out.push_back({"q" + std::to_string(id++), v, system});
  };
  add(Verdict::accurate, acc);
  add(Verdict::hallucinated, hal);
  add(Verdict::missing, miss);
  return out;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("nearest rank: sort and index oracle") {
    std::vector<double> v{10, 3, 7, 1, 9, 2, 8, 4, 6, 5};
    CHECK(nearest_rank(v, 90) == 9);
    CHECK(nearest_rank(v, 50) == 5);
    CHECK(nearest_rank(v, 100) == 10);
    CHECK(nearest_rank(v, 1) == 1);
    CHECK(nearest_rank({42}, 50) == 42);
    CHECK_THROWS_AS(nearest_rank({}, 50), std::invalid_argument);
    CHECK_THROWS_AS(nearest_rank(v, 0), std::invalid_argument);
    CHECK_THROWS_AS(nearest_rank(v, 101), std::invalid_argument);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> val(0, 100);
    std::uniform_int_distribution<int> size(1, 60);
    for (int round = 0; round < 500; ++round) {
      std::vector<double> xs(static_cast<std::size_t>(size(rng)));
      for (auto& x : xs) x = val(rng);
      auto sorted = xs;
      std::sort(sorted.begin(), sorted.end());
      for (double pct : {10.0, 25.0, 50.0, 90.0, 99.0}) {
        // Smallest value with at least pct% of the data at or below it.
        double expected = sorted.back();
        for (std::size_t i = 0; i < sorted.size(); ++i) {
          if (static_cast<double>(i + 1) * 100.0 >= pct * static_cast<double>(sorted.size())) {
            expected = sorted[i];
            break;
          }
        }
        CHECK(nearest_rank(xs, pct) == expected);
      }
    }
  }

  TEST_CASE("latency table: single outcome, open-book row, ordering") {
    auto t = aggregate_latency({outcome("a", Strategy::open_book, 590, 2780, 2520)});
    const auto& p50 = t.at(Strategy::open_book, Stat::p50);
    const auto& p90 = t.at(Strategy::open_book, Stat::p90);
    CHECK(p50 == LatencyRow{Strategy::open_book, Stat::p50, 1, 590, 2780, 2520, 5890, 6890});
    CHECK(p90.first_token_ms == p50.first_token_ms);
    CHECK_THROWS_AS(t.at(Strategy::model_triggered, Stat::p50), std::out_of_range);
    CHECK_THROWS_AS(aggregate_latency({}), InputError);
    auto incomplete = outcome("b", Strategy::open_book, 1, 1, 1);
    incomplete.completed = false;
    CHECK_THROWS_AS(aggregate_latency({incomplete}), InputError);
  }

  TEST_CASE("latency table: ten outcomes with totals 1..10") {
    std::vector<orch::SessionOutcome> outs;
    for (int i = 1; i <= 10; ++i) outs.push_back(outcome("u" + std::to_string(i), Strategy::open_book, 0, 0, i));
    auto t = aggregate_latency(outs);
    CHECK(t.at(Strategy::open_book, Stat::p90).first_token_ms == 9);
    CHECK(t.at(Strategy::open_book, Stat::p50).first_token_ms == 5);
    CHECK(t.at(Strategy::open_book, Stat::mean).first_token_ms == doctest::Approx(5.5));
  }

  TEST_CASE("latency table property: P50 <= P90 in every column") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<Millis> ms(0, 5000);
    for (int round = 0; round < 100; ++round) {
      std::vector<orch::SessionOutcome> outs;
      for (int i = 0; i < 25; ++i) {
        for (auto s : {Strategy::open_book, Strategy::model_triggered}) {
          outs.push_back(outcome(std::to_string(i), s, ms(rng), ms(rng), ms(rng)));
        }
      }
      auto t = aggregate_latency(outs);
      for (auto s : {Strategy::open_book, Strategy::model_triggered}) {
        const auto& a = t.at(s, Stat::p50);
        const auto& b = t.at(s, Stat::p90);
        CHECK(a.query_gen_ms <= b.query_gen_ms);
        CHECK(a.tool_results_ms <= b.tool_results_ms);
        CHECK(a.response_gen_ms <= b.response_gen_ms);
        CHECK(a.first_token_ms <= b.first_token_ms);
        CHECK(a.last_token_ms <= b.last_token_ms);
        CHECK(a.sessions == 25);
      }
    }
  }

  TEST_CASE("savings: identical sets save nothing") {
    std::vector<orch::SessionOutcome> outs{outcome("a", Strategy::open_book, 590, 2780, 2520),
                                           outcome("b", Strategy::open_book, 600, 3000, 2500)};
    auto r = savings_report(outs, outs, SavingsBasis::mean);
    CHECK(r.mean_savings_pct == 0);
    CHECK(r.pct_queries_benefiting == 0);
    CHECK(r.pairs == 2);
  }

  TEST_CASE("savings: every pair saves half the tool-use latency") {
    std::vector<orch::SessionOutcome> base{outcome("a", Strategy::open_book, 0, 2000, 1),
                                           outcome("b", Strategy::open_book, 0, 2000, 1)};
    std::vector<orch::SessionOutcome> strat{outcome("a", Strategy::model_triggered, 0, 1000, 1),
                                            outcome("b", Strategy::model_triggered, 0, 1000, 1)};
    for (auto basis : {SavingsBasis::mean, SavingsBasis::p50}) {
      auto r = savings_report(base, strat, basis);
      CHECK(r.mean_savings_pct == doctest::Approx(50));
      CHECK(r.pct_queries_benefiting == doctest::Approx(100));
    }
  }

  TEST_CASE("savings: 0, 0.58 and 1.16 s over a 3.37 s base") {
    std::vector<orch::SessionOutcome> base;
    std::vector<orch::SessionOutcome> strat;
    const Millis saved[] = {0, 580, 1160};
    for (int i = 0; i < 3; ++i) {
      base.push_back(outcome("u" + std::to_string(i), Strategy::open_book, 590, 2780, 2520));
      strat.push_back(outcome("u" + std::to_string(i), Strategy::model_triggered, 590, 2780 - saved[i], 2520));
    }
    auto r = savings_report(base, strat, SavingsBasis::mean, 3370.0);
    // (0 + 580 + 1160) / 3 / 3370
    CHECK(round1(r.mean_savings_pct) == doctest::Approx(17.2));
    CHECK(round1(r.pct_queries_benefiting) == doctest::Approx(66.7));
    CHECK(r.tool_use_latency_base_ms == 3370.0);
    // The measured mean base is the same 0.59 + 2.78 here.
    CHECK(savings_report(base, strat, SavingsBasis::mean).tool_use_latency_base_ms == 3370.0);
  }

  TEST_CASE("savings: unpaired and duplicated ids are listed") {
    std::vector<orch::SessionOutcome> base{outcome("a", Strategy::open_book, 1, 1, 1),
                                           outcome("b", Strategy::open_book, 1, 1, 1)};
    std::vector<orch::SessionOutcome> strat{outcome("a", Strategy::model_triggered, 1, 1, 1),
                                            outcome("c", Strategy::model_triggered, 1, 1, 1)};
    try {
      savings_report(base, strat, SavingsBasis::mean);
      FAIL("expected an error");
    } catch (const InputError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("b (baseline only)") != std::string::npos);
      CHECK(msg.find("c (strategy only)") != std::string::npos);
    }
    base.push_back(outcome("a", Strategy::open_book, 1, 1, 1));
    CHECK_THROWS_AS(savings_report(base, base, SavingsBasis::mean), InputError);
  }

  TEST_CASE("savings properties: antisymmetry and bounds") {
    std::mt19937_64 rng(15);
    std::uniform_int_distribution<Millis> ms(0, 5000);
    for (int round = 0; round < 300; ++round) {
      std::vector<orch::SessionOutcome> a;
      std::vector<orch::SessionOutcome> b;
      for (int i = 0; i < 12; ++i) {
        a.push_back(outcome(std::to_string(i), Strategy::open_book, ms(rng), ms(rng), ms(rng)));
        b.push_back(outcome(std::to_string(i), Strategy::model_triggered, ms(rng), ms(rng), ms(rng), 1));
      }
      const double base = 1000.0 + static_cast<double>(ms(rng));
      auto ab = savings_report(a, b, SavingsBasis::mean, base);
      auto ba = savings_report(b, a, SavingsBasis::mean, base);
      CHECK(ab.mean_savings_pct == doctest::Approx(-ba.mean_savings_pct));
      for (const auto* r : {&ab, &ba}) {
        CHECK(r->pct_queries_benefiting >= 0);
        CHECK(r->pct_queries_benefiting <= 100);
      }
      CHECK(ab.max_parallel_threads == 1);
    }
  }

  TEST_CASE("scores: first row and the all-accurate case") {
    auto s = score_responses(judgments("text", 279, 523, 1060));
    CHECK(round1(s.accuracy_pct) == doctest::Approx(15.0));
    CHECK(round1(s.hallucination_pct) == doctest::Approx(28.1));
    CHECK(round1(s.missing_pct) == doctest::Approx(56.9));
    CHECK(round1(s.truthfulness_score) == doctest::Approx(-13.1));
    auto perfect = score_responses(judgments("x", 10, 0, 0));
    CHECK(perfect.truthfulness_score == 100);
  }

  TEST_CASE("scores: 24.2 - 62.7") {
    auto s = score_responses(judgments("kimi", 451, 1167, 244));
    CHECK(round1(s.accuracy_pct) == doctest::Approx(24.2));
    CHECK(round1(s.hallucination_pct) == doctest::Approx(62.7));
    CHECK(round1(s.truthfulness_score) == doctest::Approx(-38.5));
  }

  TEST_CASE("scores: one verdict per utterance per system") {
    auto j = judgments("a", 2, 0, 0);
    j.push_back(j.front());
    CHECK_THROWS_AS(score_responses(j), InputError);
    auto other = judgments("b", 2, 0, 0);
    auto both = judgments("a", 2, 0, 0);
    both.insert(both.end(), other.begin(), other.end());
    CHECK_NOTHROW(score_responses(both));
    CHECK_THROWS_AS(score_responses({}), InputError);
    CHECK_THROWS_AS(verdict_from_string("wrong"), InputError);
  }

  TEST_CASE("scores properties: closure and score identity") {
    std::mt19937_64 rng(19);
    std::uniform_int_distribution<int> n(0, 400);
    for (int round = 0; round < 500; ++round) {
      int a = n(rng), h = n(rng), m = n(rng);
      if (a + h + m == 0) m = 1;
      auto s = score_responses(judgments("s", a, h, m));
      CHECK(s.accuracy_pct + s.hallucination_pct + s.missing_pct == doctest::Approx(100.0));
      const double rounded = round1(s.accuracy_pct) + round1(s.hallucination_pct) + round1(s.missing_pct);
      CHECK(std::abs(rounded - 100.0) <= 0.15 + 1e-9);
      CHECK(s.truthfulness_score == doctest::Approx(s.accuracy_pct - s.hallucination_pct));
    }
  }

  TEST_CASE("round1 rounds half away from zero") {
    CHECK(round1(0.25) == doctest::Approx(0.3));
    CHECK(round1(-0.25) == doctest::Approx(-0.3));
    CHECK(round1(-13.107) == doctest::Approx(-13.1));
  }

  TEST_CASE("judgment fixture: six systems") {
    auto all = read_judgments(testing::fixture("judgments.jsonl"));
    std::map<std::string, std::vector<Judgment>> by;
    for (const auto& j : all) by[j.system].push_back(j);
    CHECK(by.size() == 6);
    CHECK(round1(score_responses(by.at("text/qwen2.5-7b")).truthfulness_score) == doctest::Approx(-13.1));
  }

  TEST_CASE("outputs: csv and json shapes") {
    auto t = aggregate_latency({outcome("a", Strategy::open_book, 590, 2780, 2520)});
    auto csv = latency_table_csv(t);
    CHECK(csv.rfind("strategy,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    auto j = latency_table_json(t);
    CHECK(j.dump().find("open_book") != std::string::npos);
    std::vector<orch::SessionOutcome> outs{outcome("a", Strategy::open_book, 590, 2780, 2520)};
    auto r = savings_report(outs, outs, SavingsBasis::p50);
    CHECK(savings_json(r).contains("formula"));
    CHECK(savings_pairs_csv(r).find("a,") != std::string::npos);
    CHECK_FALSE(savings_csv(r).empty());
    CHECK(scores_json(score_responses(judgments("s", 1, 1, 1))).contains("truthfulness_score"));
  }
}
