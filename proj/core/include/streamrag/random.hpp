#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace streamrag {

/// Independent generator for one keyed unit of work (usually an utterance),
/// so results never depend on batch order.
inline std::mt19937_64 substream(std::uint64_t seed, std::string_view key) {
  std::vector<std::uint32_t> material;
  material.reserve(key.size() + 2);
  material.push_back(static_cast<std::uint32_t>(seed));
  material.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (char c : key) material.push_back(static_cast<unsigned char>(c));
  std::seed_seq seq(material.begin(), material.end());
  return std::mt19937_64(seq);
}

}  // namespace streamrag
