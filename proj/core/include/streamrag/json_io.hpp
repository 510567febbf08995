#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamrag/config.hpp"
#include "streamrag/retrieval.hpp"
#include "streamrag/types.hpp"

namespace streamrag::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

Json kg_to_json(const KgQuery& q);
KgQuery kg_from_json(const Json& j);

/// Web queries are strings, KG queries flat objects, NoQuery "NO_QUERY".
Json query_to_json(const ToolQuery& q);
ToolQuery query_from_json(const Json& j, Tool tool);

Json trace_to_json(const UtteranceTrace& t);
UtteranceTrace trace_from_json(const Json& j);

/// Calls `on_line` for each non-blank line; parse and validation failures
/// are rethrown as InputError carrying `path:line`.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&, std::size_t line)>& on_line);

std::vector<UtteranceTrace> read_traces(const std::filesystem::path& path);
void write_traces(const std::vector<UtteranceTrace>& traces, const std::filesystem::path& path);

std::vector<retrieval::Document> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::vector<retrieval::Document>& docs, const std::filesystem::path& path);

/// JSON array of {query: {domain, ...}, answer}.
retrieval::KgStore read_kg_store(const std::filesystem::path& path);

Json bundle_to_json(const retrieval::ReferenceBundle& b);

Json config_to_json(const SessionConfig& c);
/// Overlays the keys present in `j` on `base`. Unknown keys are an
/// InputError; the result is validated.
SessionConfig config_from_json(const Json& j, SessionConfig base = {});

/// Writes through a temporary sibling and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace streamrag::io
