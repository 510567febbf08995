#include "streamrag/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iterator>
#include <set>
#include <sstream>
#include <stdexcept>

namespace streamrag::retrieval {

std::vector<std::string> analyze(std::string_view text) {
  std::vector<std::string> terms;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) terms.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c >= 0x80 || std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    }
  }
  flush();
  return terms;
}

double TermStats::idf(const std::string& term) const {
  auto it = doc_freq.find(term);
  if (it == doc_freq.end() || it->second == 0) return 0.0;
  return std::log(static_cast<double>(doc_count) / static_cast<double>(it->second));
}

std::vector<double> RelevanceScorer::score_corpus(std::string_view query,
                                                  std::span<const Document> corpus) const {
  std::vector<double> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus) out.push_back(score(query, d.text));
  return out;
}

TfIdfCosineScorer::TfIdfCosineScorer(std::shared_ptr<const TermStats> stats,
                                     std::span<const Document> corpus)
    : stats_(std::move(stats)) {
  doc_vectors_.reserve(corpus.size());
  doc_norms_.reserve(corpus.size());
  for (const auto& d : corpus) {
    doc_vectors_.push_back(weigh(d.text));
    doc_norms_.push_back(norm(doc_vectors_.back()));
  }
}

TfIdfCosineScorer::TermVector TfIdfCosineScorer::weigh(std::string_view text) const {
  TermVector tf;
  for (auto& term : analyze(text)) tf[term] += 1.0;
  TermVector out;
  for (auto& [term, count] : tf) {
    double w = count * stats_->idf(term);
    if (w > 0.0) out.emplace(term, w);
  }
  return out;
}

double TfIdfCosineScorer::norm(const TermVector& v) {
  double sum = 0.0;
  for (const auto& [term, w] : v) sum += w * w;
  return std::sqrt(sum);
}

double TfIdfCosineScorer::cosine(const TermVector& q, double q_norm, const TermVector& d,
                                 double d_norm) {
  if (q_norm == 0.0 || d_norm == 0.0) return 0.0;
  double dot = 0.0;
  for (const auto& [term, w] : q) {
    auto it = d.find(term);
    if (it != d.end()) dot += w * it->second;
  }
  return dot / (q_norm * d_norm);
}

double TfIdfCosineScorer::score(std::string_view query, std::string_view passage) const {
  auto q = weigh(query);
  auto d = weigh(passage);
  return cosine(q, norm(q), d, norm(d));
}

std::vector<double> TfIdfCosineScorer::score_corpus(std::string_view query,
                                                    std::span<const Document> corpus) const {
  if (corpus.size() != doc_vectors_.size()) return RelevanceScorer::score_corpus(query, corpus);
  auto q = weigh(query);
  double qn = norm(q);
  std::vector<double> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < doc_vectors_.size(); ++i) {
    out.push_back(cosine(q, qn, doc_vectors_[i], doc_norms_[i]));
  }
  return out;
}

DocIndex::DocIndex(std::vector<Document> corpus, ScorerFactory factory)
    : docs_(std::move(corpus)) {
  if (docs_.empty()) throw InputError("cannot index an empty corpus");
  auto stats = std::make_shared<TermStats>();
  stats->doc_count = docs_.size();
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    const auto& d = docs_[i];
    if (d.doc_id.empty()) throw InputError("document " + std::to_string(i) + " has no doc_id");
    if (!position_.emplace(d.doc_id, i).second) {
      throw InputError("duplicate doc_id '" + d.doc_id + "'");
    }
    auto terms = analyze(d.text);
    std::set<std::string> unique(terms.begin(), terms.end());
    for (const auto& t : unique) ++stats->doc_freq[t];
  }
  stats_ = stats;
  if (factory) {
    scorer_ = factory(stats_, docs_);
  } else {
    scorer_ = std::make_shared<TfIdfCosineScorer>(stats_, docs_);
  }
}

const Document& DocIndex::doc(std::string_view doc_id) const {
  auto it = position_.find(std::string(doc_id));
  if (it == position_.end()) throw InputError("unknown doc_id '" + std::string(doc_id) + "'");
  return docs_[it->second];
}

std::vector<std::string> WebResult::doc_ids(std::size_t limit) const {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < ranked_docs.size() && i < limit; ++i) {
    ids.push_back(ranked_docs[i].doc_id);
  }
  return ids;
}

WebResult web_search(const DocIndex& index, const ToolQuery& query, int k) {
  if (!query.is_web()) {
    throw ToolMismatch("web_search needs a web query, got " + query.describe());
  }
  return web_search(index, query.web_text(), k);
}

WebResult web_search(const DocIndex& index, std::string_view query_text, int k) {
  if (k < 1) throw std::invalid_argument("web_search: k must be >= 1");
  auto scores = index.scorer().score_corpus(query_text, index.docs());
  std::vector<RankedDoc> ranked;
  ranked.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ranked.push_back(RankedDoc{index.docs()[i].doc_id, scores[i]});
  }
  auto n = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), ranked.end(),
                    [](const RankedDoc& a, const RankedDoc& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.doc_id < b.doc_id;
                    });
  ranked.resize(n);
  return WebResult{std::string(query_text), std::move(ranked), {}};
}

WebResult chunk_and_rerank(const DocIndex& index, WebResult result, std::string_view query_text,
                           int chunk_tokens, int max_docs) {
  if (chunk_tokens < 1) throw std::invalid_argument("chunk_and_rerank: chunk_tokens must be >= 1");
  const auto limit = max_docs < 0 ? result.ranked_docs.size()
                                  : std::min<std::size_t>(static_cast<std::size_t>(max_docs),
                                                          result.ranked_docs.size());
  std::vector<RankedChunk> chunks;
  for (std::size_t i = 0; i < limit; ++i) {
    const auto& doc = index.doc(result.ranked_docs[i].doc_id);
    std::istringstream in(doc.text);
    std::vector<std::string> tokens{std::istream_iterator<std::string>(in),
                                    std::istream_iterator<std::string>()};
    for (std::size_t start = 0; start < tokens.size();
         start += static_cast<std::size_t>(chunk_tokens)) {
      auto stop = std::min(tokens.size(), start + static_cast<std::size_t>(chunk_tokens));
      std::string text;
      for (auto t = start; t < stop; ++t) {
        if (t > start) text += ' ';
        text += tokens[t];
      }
      double s = index.scorer().score(query_text, text);
      chunks.push_back(RankedChunk{doc.doc_id, static_cast<int>(start), std::move(text), s});
    }
  }
  std::stable_sort(chunks.begin(), chunks.end(), [](const RankedChunk& a, const RankedChunk& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
    return a.offset < b.offset;
  });
  result.ranked_chunks = std::move(chunks);
  return result;
}

KgStore::KgStore(std::vector<std::pair<KgQuery, std::string>> entries) {
  for (auto& [query, answer] : entries) {
    auto key = ToolQuery::kg(query.canonical()).describe();
    auto [it, inserted] = entries_.emplace(key, answer);
    if (!inserted && it->second != answer) {
      throw InputError("conflicting KG answers for " + key);
    }
  }
}

std::optional<std::string> KgStore::find(const KgQuery& query) const {
  auto it = entries_.find(ToolQuery::kg(query.canonical()).describe());
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> kg_lookup(const KgStore& store, const ToolQuery& query) {
  if (!query.is_kg()) throw ToolMismatch("kg_lookup needs a KG query, got " + query.describe());
  return store.find(query.kg_query());
}

std::int64_t ReferenceBundle::web_token_count() const {
  std::int64_t n = 0;
  for (const auto& c : web_chunks) n += static_cast<std::int64_t>(count_tokens(c));
  return n;
}

std::int64_t ReferenceBundle::kg_token_count() const {
  std::int64_t n = 0;
  for (const auto& a : kg_answers) n += static_cast<std::int64_t>(count_tokens(a));
  return n;
}

namespace {

std::string first_tokens(const std::string& text, std::int64_t n) {
  std::istringstream in(text);
  std::string out;
  std::string tok;
  for (std::int64_t i = 0; i < n && in >> tok; ++i) {
    if (i > 0) out += ' ';
    out += tok;
  }
  return out;
}

}  // namespace

ReferenceBundle assemble_references(const WebResult* web, const std::optional<std::string>& kg,
                                    std::int64_t budget_tokens, Ratio ratio) {
  if (budget_tokens < 0) throw std::invalid_argument("assemble_references: negative budget");
  ReferenceBundle bundle;
  std::int64_t web_budget = budget_tokens;

  if (kg && ratio.kg > 0) {
    const std::int64_t kg_cap = budget_tokens * ratio.kg / (ratio.web + ratio.kg);
    const auto kg_tokens = static_cast<std::int64_t>(count_tokens(*kg));
    if (kg_tokens > 0 && kg_tokens <= kg_cap) {
      bundle.kg_answers.push_back(*kg);
      bundle.total_tokens += kg_tokens;
      web_budget = budget_tokens - kg_cap;
    }
  }

  if (web != nullptr && ratio.web > 0) {
    std::int64_t used = 0;
    for (const auto& chunk : web->ranked_chunks) {
      const auto n = static_cast<std::int64_t>(count_tokens(chunk.text));
      const auto room = web_budget - used;
      if (room <= 0) break;
      if (n <= room) {
        bundle.web_chunks.push_back(chunk.text);
        used += n;
      } else {
        bundle.web_chunks.push_back(first_tokens(chunk.text, room));
        used += room;
        break;
      }
    }
    bundle.total_tokens += used;
  }
  return bundle;
}

}  // namespace streamrag::retrieval
