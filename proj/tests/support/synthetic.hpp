#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "streamrag/retrieval.hpp"
#include "streamrag/types.hpp"

namespace streamrag::testing {

/// Path of a file under data/fixtures.
std::filesystem::path fixture(const std::string& name);

/// Phrase that occurs in document `i` of the synthetic corpus and nowhere else.
std::string unique_phrase(std::size_t i);

/// Deterministic corpus of `n` documents over ten topics. Document texts run
/// from 40 to 300 words so some of them span several chunks.
std::vector<retrieval::Document> synthetic_corpus(std::size_t n = 200);

struct KgFixture {
  std::vector<std::pair<KgQuery, std::string>> entries;
  /// Queries with an answer, then queries absent from the store.
  std::vector<KgQuery> known;
  std::vector<KgQuery> unknown;
};

KgFixture synthetic_kg();

struct TraceShape {
  int min_words = 3;
  int max_words = 16;
  /// Probability that the scripted query for a prefix already equals the
  /// final query, before the last few prefixes force convergence.
  double early_final = 0.3;
};

/// Random utterance with a scripted entry for every prefix length 0..N.
/// Queries are drawn from the synthetic corpus and KG so they retrieve
/// something; they never are NoQuery.
UtteranceTrace random_trace(std::mt19937_64& rng, const std::string& id, std::size_t corpus_size,
                            const KgFixture& kg, const TraceShape& shape = {});

/// Writes a KG fixture in the JSON array format the CLI reads.
void write_kg(const KgFixture& kg, const std::filesystem::path& path);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace streamrag::testing
