#include "streamrag/config.hpp"

#include <charconv>

namespace streamrag {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::closed_book:
      return "closed_book";
    case Strategy::open_book:
      return "open_book";
    case Strategy::fixed_interval:
      return "fixed_interval";
    case Strategy::model_triggered:
      return "model_triggered";
  }
  return "?";
}

Strategy strategy_from_string(std::string_view name) {
  for (auto s : {Strategy::closed_book, Strategy::open_book, Strategy::fixed_interval,
                 Strategy::model_triggered}) {
    if (to_string(s) == name) return s;
  }
  throw InputError("unknown strategy '" + std::string(name) +
                   "'; valid options: closed_book, open_book, fixed_interval, model_triggered");
}

Millis default_block_ms(Strategy s) { return s == Strategy::model_triggered ? 500 : 1000; }

Ratio ratio_from_string(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw InputError("ratio must look like WEB:KG, got '" + std::string(text) + "'");
  }
  auto parse = [&](std::string_view part) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc{} || ptr != part.data() + part.size() || v < 0) {
      throw InputError("bad ratio component '" + std::string(part) + "'");
    }
    return v;
  };
  Ratio r{parse(text.substr(0, colon)), parse(text.substr(colon + 1))};
  if (r.web + r.kg == 0) throw InputError("ratio must have a positive component");
  return r;
}

std::string to_string(Ratio r) { return std::to_string(r.web) + ":" + std::to_string(r.kg); }

void SessionConfig::validate() const {
  if (block_ms <= 0) throw InputError("block_ms must be > 0");
  if (ref_length_tokens < 0) throw InputError("ref_length_tokens must be >= 0");
  if (web_kg_ratio.web < 0 || web_kg_ratio.kg < 0 || web_kg_ratio.web + web_kg_ratio.kg == 0) {
    throw InputError("web_kg_ratio must be non-negative with a positive sum");
  }
  if (top_docs < 1) throw InputError("top_docs must be >= 1");
  if (reflect_top_k < 1) throw InputError("reflect_top_k must be >= 1");
  if (context_docs < 1) throw InputError("context_docs must be >= 1");
  if (chunk_tokens < 1) throw InputError("chunk_tokens must be >= 1");
  if (!(negative_sample_prob >= 0.0 && negative_sample_prob <= 1.0)) {
    throw InputError("negative_sample_prob must lie in [0, 1]");
  }
  if (endpoint_delay_ms < 0) throw InputError("endpoint_delay_ms must be >= 0");
}

SessionConfig default_config(Strategy s) {
  SessionConfig c;
  c.strategy = s;
  c.block_ms = default_block_ms(s);
  return c;
}

}  // namespace streamrag
