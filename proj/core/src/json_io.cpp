#include "streamrag/json_io.hpp"

#include <fstream>
#include <sstream>

namespace streamrag::io {

Json kg_to_json(const KgQuery& q) {
  Json j;
  j["domain"] = std::string(to_string(q.domain()));
  for (const auto& [key, value] : q.attributes()) j[key] = value;
  return j;
}

KgQuery kg_from_json(const Json& j) {
  if (!j.is_object()) throw InputError("KG query must be a JSON object");
  if (!j.contains("domain") || !j["domain"].is_string()) {
    throw InputError("KG query needs a string 'domain'");
  }
  std::map<std::string, std::string> attrs;
  for (const auto& [key, value] : j.items()) {
    if (key == "domain") continue;
    if (value.is_string()) {
      attrs.emplace(key, value.get<std::string>());
    } else if (value.is_number_integer()) {
      attrs.emplace(key, std::to_string(value.get<long long>()));
    } else if (value.is_number() || value.is_boolean()) {
      attrs.emplace(key, value.dump());
    } else {
      throw InputError("KG query attribute '" + key + "' must be a scalar (flat map)");
    }
  }
  return KgQuery(kg_domain_from_string(j["domain"].get<std::string>()), std::move(attrs));
}

Json query_to_json(const ToolQuery& q) {
  if (q.is_none()) return std::string(kNoQueryLabel);
  if (q.is_web()) return q.web_text();
  return kg_to_json(q.kg_query());
}

ToolQuery query_from_json(const Json& j, Tool tool) {
  if (j.is_null()) return ToolQuery::none();
  if (j.is_string() && j.get<std::string>() == kNoQueryLabel) return ToolQuery::none();
  if (tool == Tool::web) {
    if (!j.is_string()) throw InputError("web query must be a string");
    return ToolQuery::web(j.get<std::string>());
  }
  return ToolQuery::kg(kg_from_json(j));
}

Json trace_to_json(const UtteranceTrace& t) {
  Json j;
  j["utterance_id"] = t.utterance_id;
  Json words = Json::array();
  for (const auto& w : t.words) {
    words.push_back(Json{{"text", w.text}, {"start_ms", w.start_ms}, {"end_ms", w.end_ms}});
  }
  j["words"] = std::move(words);
  Json scripted = Json::object();
  for (const auto& [n, entry] : t.scripted_queries) {
    scripted[std::to_string(n)] =
        Json{{"web", query_to_json(entry.web)}, {"kg", query_to_json(entry.kg)}};
  }
  j["scripted_queries"] = std::move(scripted);
  j["final_answer_ref"] = t.final_answer_ref ? Json(*t.final_answer_ref) : Json(nullptr);
  return j;
}

UtteranceTrace trace_from_json(const Json& j) {
  UtteranceTrace t;
  try {
    t.utterance_id = j.at("utterance_id").get<std::string>();
    for (const auto& w : j.at("words")) {
      t.words.push_back(Word{w.at("text").get<std::string>(), w.at("start_ms").get<Millis>(),
                             w.at("end_ms").get<Millis>()});
    }
    if (j.contains("scripted_queries")) {
      for (const auto& [key, entry] : j["scripted_queries"].items()) {
        std::size_t used = 0;
        int n = std::stoi(key, &used);
        if (used != key.size() || n < 0) throw InputError("bad prefix index '" + key + "'");
        ScriptedEntry e;
        e.web = entry.contains("web") ? query_from_json(entry["web"], Tool::web) : ToolQuery{};
        e.kg = entry.contains("kg") ? query_from_json(entry["kg"], Tool::kg) : ToolQuery{};
        t.scripted_queries.emplace(n, std::move(e));
      }
    }
    if (j.contains("final_answer_ref") && j["final_answer_ref"].is_string()) {
      t.final_answer_ref = j["final_answer_ref"].get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed trace: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("malformed trace: ") + e.what());
  }
  return t;
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const Json&, std::size_t line)>& on_line) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      on_line(Json::parse(text), line_no);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::vector<UtteranceTrace> read_traces(const std::filesystem::path& path) {
  std::vector<UtteranceTrace> traces;
  for_each_jsonl(path, [&](const Json& j, std::size_t) { traces.push_back(trace_from_json(j)); });
  return traces;
}

void write_traces(const std::vector<UtteranceTrace>& traces, const std::filesystem::path& path) {
  std::string out;
  for (const auto& t : traces) out += trace_to_json(t).dump() + "\n";
  write_file_atomic(path, out);
}

std::vector<retrieval::Document> read_corpus(const std::filesystem::path& path) {
  std::vector<retrieval::Document> docs;
  for_each_jsonl(path, [&](const Json& j, std::size_t) {
    docs.push_back(
        retrieval::Document{j.at("doc_id").get<std::string>(), j.at("text").get<std::string>()});
  });
  return docs;
}

void write_corpus(const std::vector<retrieval::Document>& docs, const std::filesystem::path& path) {
  std::string out;
  for (const auto& d : docs) out += Json{{"doc_id", d.doc_id}, {"text", d.text}}.dump() + "\n";
  write_file_atomic(path, out);
}

retrieval::KgStore read_kg_store(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw InputError(path.string() + ": expected a JSON array");
  std::vector<std::pair<KgQuery, std::string>> entries;
  for (std::size_t i = 0; i < j.size(); ++i) {
    try {
      entries.emplace_back(kg_from_json(j[i].at("query")), j[i].at("answer").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ": entry " + std::to_string(i) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(path.string() + ": entry " + std::to_string(i) + ": " + e.what());
    }
  }
  return retrieval::KgStore(std::move(entries));
}

Json bundle_to_json(const retrieval::ReferenceBundle& b) {
  return Json{{"web", b.web_chunks}, {"kg", b.kg_answers}, {"total_tokens", b.total_tokens}};
}

Json config_to_json(const SessionConfig& c) {
  return Json{{"strategy", std::string(to_string(c.strategy))},
              {"block_ms", c.block_ms},
              {"ref_length_tokens", c.ref_length_tokens},
              {"web_kg_ratio", to_string(c.web_kg_ratio)},
              {"top_docs", c.top_docs},
              {"reflect_top_k", c.reflect_top_k},
              {"context_docs", c.context_docs},
              {"chunk_tokens", c.chunk_tokens},
              {"reflect_set_equality", c.reflect_set_equality},
              {"negative_sample_prob", c.negative_sample_prob},
              {"rng_seed", c.rng_seed},
              {"endpoint_delay_ms", c.endpoint_delay_ms}};
}

SessionConfig config_from_json(const Json& j, SessionConfig c) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "strategy") {
        c.strategy = strategy_from_string(v.get<std::string>());
      } else if (key == "block_ms") {
        c.block_ms = v.get<Millis>();
      } else if (key == "ref_length_tokens") {
        c.ref_length_tokens = v.get<std::int64_t>();
      } else if (key == "web_kg_ratio") {
        c.web_kg_ratio = ratio_from_string(v.get<std::string>());
      } else if (key == "top_docs") {
        c.top_docs = v.get<int>();
      } else if (key == "reflect_top_k") {
        c.reflect_top_k = v.get<int>();
      } else if (key == "context_docs") {
        c.context_docs = v.get<int>();
      } else if (key == "chunk_tokens") {
        c.chunk_tokens = v.get<int>();
      } else if (key == "reflect_set_equality") {
        c.reflect_set_equality = v.get<bool>();
      } else if (key == "negative_sample_prob") {
        c.negative_sample_prob = v.get<double>();
      } else if (key == "rng_seed") {
        c.rng_seed = v.get<std::uint64_t>();
      } else if (key == "endpoint_delay_ms") {
        c.endpoint_delay_ms = v.get<Millis>();
      } else {
        throw InputError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InputError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace streamrag::io
