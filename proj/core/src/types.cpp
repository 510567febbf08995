#include "streamrag/types.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

namespace streamrag {

namespace {

std::string trim_lower(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(begin, end - begin + 1));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(Tool tool) {
  switch (tool) {
    case Tool::web:
      return "web";
    case Tool::kg:
      return "kg";
  }
  return "?";
}

Tool tool_from_string(std::string_view name) {
  if (name == "web") return Tool::web;
  if (name == "kg") return Tool::kg;
  throw InputError("unknown tool '" + std::string(name) + "' (expected web or kg)");
}

std::string_view to_string(KgDomain domain) {
  switch (domain) {
    case KgDomain::finance:
      return "finance";
    case KgDomain::sports:
      return "sports";
    case KgDomain::music:
      return "music";
    case KgDomain::movie:
      return "movie";
    case KgDomain::encyclopedia:
      return "encyclopedia";
    case KgDomain::other:
      return "other";
  }
  return "?";
}

KgDomain kg_domain_from_string(std::string_view name) {
  for (auto d : {KgDomain::finance, KgDomain::sports, KgDomain::music, KgDomain::movie,
                 KgDomain::encyclopedia, KgDomain::other}) {
    if (to_string(d) == name) return d;
  }
  throw InputError("unknown KG domain '" + std::string(name) + "'");
}

const std::vector<std::string_view>& allowed_kg_keys(KgDomain domain) {
  static const std::vector<std::string_view> entity = {"main_entity"};
  static const std::vector<std::string_view> finance = {"market_identifier", "metric",
                                                        "datetime"};
  static const std::vector<std::string_view> movie = {"movie_name", "movie_aspect", "person",
                                                      "person_aspect", "year"};
  static const std::vector<std::string_view> music = {"artist_name", "artist_aspect",
                                                      "song_name", "song_aspect"};
  // `person` is not in the extraction key list for sports, but the streaming
  // model emits it (e.g. {"sport_type": "other", "person": "Darius Miles"}).
  static const std::vector<std::string_view> sports = {"sport_type", "tournament", "team",
                                                       "datetime", "person"};
  switch (domain) {
    case KgDomain::finance:
      return finance;
    case KgDomain::sports:
      return sports;
    case KgDomain::music:
      return music;
    case KgDomain::movie:
      return movie;
    case KgDomain::encyclopedia:
    case KgDomain::other:
      return entity;
  }
  return entity;
}

KgQuery::KgQuery(KgDomain domain, std::map<std::string, std::string> attributes)
    : domain_(domain), attributes_(std::move(attributes)) {
  const auto& allowed = allowed_kg_keys(domain_);
  for (const auto& [key, value] : attributes_) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw InputError("KG key '" + key + "' is not valid for domain '" +
                       std::string(to_string(domain_)) + "'");
    }
  }
}

KgQuery KgQuery::canonical() const {
  std::map<std::string, std::string> out;
  for (const auto& [key, value] : attributes_) out.emplace(key, trim_lower(value));
  return KgQuery(domain_, std::move(out));
}

ToolQuery ToolQuery::web(std::string text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw InputError("web query text must be non-empty");
  }
  if (text == kNoQueryLabel) {
    throw InputError("web query text may not be the NO_QUERY sentinel");
  }
  ToolQuery q;
  q.v_ = Web{std::move(text)};
  return q;
}

ToolQuery ToolQuery::kg(KgQuery query) {
  ToolQuery q;
  q.v_ = std::move(query);
  return q;
}

Tool ToolQuery::tool() const {
  if (is_web()) return Tool::web;
  if (is_kg()) return Tool::kg;
  throw ToolMismatch("NO_QUERY has no tool");
}

bool ToolQuery::belongs_to(Tool t) const noexcept {
  if (is_none()) return true;
  return (t == Tool::web) == is_web();
}

const std::string& ToolQuery::web_text() const {
  if (const auto* w = std::get_if<Web>(&v_)) return w->text;
  throw ToolMismatch("expected a web query, got " + describe());
}

const KgQuery& ToolQuery::kg_query() const {
  if (const auto* k = std::get_if<KgQuery>(&v_)) return *k;
  throw ToolMismatch("expected a KG query, got " + describe());
}

std::string ToolQuery::describe() const {
  if (is_none()) return std::string(kNoQueryLabel);
  if (is_web()) return web_text();
  const auto& q = kg_query();
  nlohmann::ordered_json j;
  j["domain"] = std::string(to_string(q.domain()));
  for (const auto& [key, value] : q.attributes()) j[key] = value;
  return j.dump();
}

std::size_t count_tokens(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

}  // namespace streamrag
