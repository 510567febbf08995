#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "streamrag/config.hpp"
#include "streamrag/types.hpp"

namespace streamrag::retrieval {

struct Document {
  std::string doc_id;
  std::string text;

  friend bool operator==(const Document&, const Document&) = default;
};

/// Lowercased terms with punctuation stripped, split on whitespace.
std::vector<std::string> analyze(std::string_view text);

/// Corpus-wide document frequencies.
struct TermStats {
  std::size_t doc_count = 0;
  std::unordered_map<std::string, std::size_t> doc_freq;

  /// ln(N / df); zero for terms absent from the corpus.
  double idf(const std::string& term) const;
};

/// Scores a passage against a query. Implementations must be deterministic.
class RelevanceScorer {
 public:
  virtual ~RelevanceScorer() = default;

  virtual double score(std::string_view query, std::string_view passage) const = 0;

  /// Scores every indexed corpus document, in corpus order. The default
  /// calls score() per document.
  virtual std::vector<double> score_corpus(std::string_view query,
                                           std::span<const Document> corpus) const;
};

/// Cosine similarity of tf-idf weighted term vectors.
class TfIdfCosineScorer final : public RelevanceScorer {
 public:
  TfIdfCosineScorer(std::shared_ptr<const TermStats> stats, std::span<const Document> corpus);

  double score(std::string_view query, std::string_view passage) const override;
  std::vector<double> score_corpus(std::string_view query,
                                   std::span<const Document> corpus) const override;

 private:
  using TermVector = std::map<std::string, double>;

  TermVector weigh(std::string_view text) const;
  static double cosine(const TermVector& q, double q_norm, const TermVector& d, double d_norm);
  static double norm(const TermVector& v);

  std::shared_ptr<const TermStats> stats_;
  std::vector<TermVector> doc_vectors_;
  std::vector<double> doc_norms_;
};

using ScorerFactory = std::function<std::unique_ptr<RelevanceScorer>(
    std::shared_ptr<const TermStats>, std::span<const Document>)>;

/// Immutable document index; safe for concurrent reads.
class DocIndex {
 public:
  /// Throws InputError on an empty corpus or duplicate doc_id.
  explicit DocIndex(std::vector<Document> corpus, ScorerFactory factory = {});

  std::size_t size() const noexcept { return docs_.size(); }
  std::span<const Document> docs() const noexcept { return docs_; }
  const TermStats& term_stats() const noexcept { return *stats_; }
  const RelevanceScorer& scorer() const noexcept { return *scorer_; }

  /// Throws InputError for an unknown id.
  const Document& doc(std::string_view doc_id) const;

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> position_;
  std::shared_ptr<const TermStats> stats_;
  std::shared_ptr<const RelevanceScorer> scorer_;
};

struct RankedDoc {
  std::string doc_id;
  double score = 0.0;

  friend bool operator==(const RankedDoc&, const RankedDoc&) = default;
};

struct RankedChunk {
  std::string doc_id;
  /// Token offset of the chunk within its document.
  int offset = 0;
  std::string text;
  double score = 0.0;

  friend bool operator==(const RankedChunk&, const RankedChunk&) = default;
};

/// Web tool result: ranked documents, then (after chunk_and_rerank) ranked
/// chunks. Both lists are sorted by score descending; ties go to the smaller
/// doc_id (and chunk offset).
struct WebResult {
  std::string query_text;
  std::vector<RankedDoc> ranked_docs;
  std::vector<RankedChunk> ranked_chunks;

  std::vector<std::string> doc_ids(std::size_t limit = static_cast<std::size_t>(-1)) const;

  friend bool operator==(const WebResult&, const WebResult&) = default;
};

/// Top-`k` documents for a web query. Throws ToolMismatch for KG or NoQuery
/// queries and std::invalid_argument for k < 1.
WebResult web_search(const DocIndex& index, const ToolQuery& query, int k);
WebResult web_search(const DocIndex& index, std::string_view query_text, int k);

/// Splits the first `max_docs` ranked documents into contiguous chunks of at
/// most `chunk_tokens` whitespace tokens and ranks the chunks against
/// `query_text` with the index's scorer.
WebResult chunk_and_rerank(const DocIndex& index, WebResult result, std::string_view query_text,
                           int chunk_tokens, int max_docs = -1);

/// Mock KG API: exact match after canonicalisation.
class KgStore {
 public:
  KgStore() = default;
  /// Throws InputError when two entries canonicalise to the same query with
  /// different answers.
  explicit KgStore(std::vector<std::pair<KgQuery, std::string>> entries);

  std::optional<std::string> find(const KgQuery& query) const;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::string, std::string> entries_;
};

/// Throws ToolMismatch unless `query` is a KG query. Absent entries give
/// nullopt.
std::optional<std::string> kg_lookup(const KgStore& store, const ToolQuery& query);

/// Reference context handed to response generation.
struct ReferenceBundle {
  std::vector<std::string> web_chunks;
  std::vector<std::string> kg_answers;
  std::int64_t total_tokens = 0;

  std::int64_t web_token_count() const;
  std::int64_t kg_token_count() const;

  friend bool operator==(const ReferenceBundle&, const ReferenceBundle&) = default;
};

/// Fills the KG share of the budget first (share = kg / (web + kg); answers
/// are never split), then web chunks in rank order. Only the last web chunk
/// may be truncated. Without a KG answer the whole budget goes to web.
ReferenceBundle assemble_references(const WebResult* web, const std::optional<std::string>& kg,
                                    std::int64_t budget_tokens, Ratio ratio);

}  // namespace streamrag::retrieval
