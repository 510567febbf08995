#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace streamrag {

/// Simulated time, integer milliseconds.
using Millis = std::int64_t;

/// Malformed or unusable input data (traces, corpora, fixtures, flags).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A query of one tool was handed to an operation that expects another.
class ToolMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// 1-based index of an input block within an utterance.
struct BlockIndex {
  int value = 1;

  friend auto operator<=>(const BlockIndex&, const BlockIndex&) = default;
};

enum class Tool { web, kg };

inline constexpr Tool kAllTools[] = {Tool::web, Tool::kg};

std::string_view to_string(Tool tool);
Tool tool_from_string(std::string_view name);

enum class KgDomain { finance, sports, music, movie, encyclopedia, other };

std::string_view to_string(KgDomain domain);
KgDomain kg_domain_from_string(std::string_view name);

/// Structured knowledge-graph query: a domain plus a flat attribute map.
///
/// Attribute keys are restricted to the keys the KG extraction step may emit
/// for the domain (e.g. `artist_name`, `artist_aspect` for music).
class KgQuery {
 public:
  KgQuery(KgDomain domain, std::map<std::string, std::string> attributes);

  KgDomain domain() const noexcept { return domain_; }
  const std::map<std::string, std::string>& attributes() const noexcept {
    return attributes_;
  }

  /// Sorted keys, lowercased and trimmed values. Pure.
  KgQuery canonical() const;

  friend bool operator==(const KgQuery&, const KgQuery&) = default;

 private:
  KgDomain domain_;
  std::map<std::string, std::string> attributes_;
};

/// Keys accepted for a domain.
const std::vector<std::string_view>& allowed_kg_keys(KgDomain domain);

/// Tagged union of Web(text) | Kg(query) | NoQuery.
class ToolQuery {
 public:
  struct NoQuery {
    friend bool operator==(const NoQuery&, const NoQuery&) = default;
  };
  struct Web {
    std::string text;
    friend bool operator==(const Web&, const Web&) = default;
  };

  ToolQuery() = default;  // NoQuery

  static ToolQuery none() { return ToolQuery{}; }
  static ToolQuery web(std::string text);
  static ToolQuery kg(KgQuery query);

  bool is_none() const noexcept { return std::holds_alternative<NoQuery>(v_); }
  bool is_web() const noexcept { return std::holds_alternative<Web>(v_); }
  bool is_kg() const noexcept { return std::holds_alternative<KgQuery>(v_); }

  /// Tool this query targets; throws ToolMismatch for NoQuery.
  Tool tool() const;
  /// True if this query may stand in for `tool` (NoQuery belongs to every tool).
  bool belongs_to(Tool tool) const noexcept;

  const std::string& web_text() const;
  const KgQuery& kg_query() const;

  /// Human-readable form: web text, compact KG JSON, or NO_QUERY.
  std::string describe() const;

  friend bool operator==(const ToolQuery&, const ToolQuery&) = default;

 private:
  std::variant<NoQuery, Web, KgQuery> v_;
};

inline constexpr std::string_view kNoQueryLabel = "NO_QUERY";

struct Word {
  std::string text;
  Millis start_ms = 0;
  Millis end_ms = 0;

  friend bool operator==(const Word&, const Word&) = default;
};

/// Per-tool pseudo ground-truth queries for one transcript prefix.
struct ScriptedEntry {
  ToolQuery web;
  ToolQuery kg;

  friend bool operator==(const ScriptedEntry&, const ScriptedEntry&) = default;
};

/// Word-timestamped transcript of one spoken question, plus the scripted
/// queries a generator would produce for each prefix. Scripted entries are
/// keyed by prefix length in words, so the same trace serves any block size.
struct UtteranceTrace {
  std::string utterance_id;
  std::vector<Word> words;
  std::map<int, ScriptedEntry> scripted_queries;
  std::optional<std::string> final_answer_ref;

  friend bool operator==(const UtteranceTrace&, const UtteranceTrace&) = default;
};

/// Whitespace-delimited word count; the unit for reference budgets.
std::size_t count_tokens(std::string_view text);

}  // namespace streamrag
