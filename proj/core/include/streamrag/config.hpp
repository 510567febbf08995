#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "streamrag/types.hpp"

namespace streamrag {

enum class Strategy { closed_book, open_book, fixed_interval, model_triggered };

std::string_view to_string(Strategy s);
/// Throws InputError listing the valid names.
Strategy strategy_from_string(std::string_view name);

/// Block length each strategy uses unless overridden.
Millis default_block_ms(Strategy s);

/// Web:KG share of the reference budget.
struct Ratio {
  int web = 2;
  int kg = 1;

  friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// Parses "2:1".
Ratio ratio_from_string(std::string_view text);
std::string to_string(Ratio r);

struct SessionConfig {
  Strategy strategy = Strategy::open_book;
  Millis block_ms = 1000;
  std::int64_t ref_length_tokens = 23000;
  Ratio web_kg_ratio{};
  int top_docs = 50;
  int reflect_top_k = 5;
  /// Ranked docs whose chunks feed the reference context. Must not exceed
  /// reflect_top_k for an early call's bundle to equal the final call's.
  int context_docs = 5;
  int chunk_tokens = 128;
  /// Reflector compares top-k doc lists as sets instead of ordered lists.
  bool reflect_set_equality = false;
  double negative_sample_prob = 0.1;
  std::uint64_t rng_seed = 0;
  /// Endpoint-detection lag added after the last word.
  Millis endpoint_delay_ms = 0;

  /// Throws InputError on violated invariants.
  void validate() const;

  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

SessionConfig default_config(Strategy s);

}  // namespace streamrag
