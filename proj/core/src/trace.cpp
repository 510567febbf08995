#include "streamrag/trace.hpp"

#include <algorithm>

namespace streamrag {

void validate_trace(const UtteranceTrace& trace) {
  if (trace.words.empty()) {
    throw InputError("utterance '" + trace.utterance_id + "' has no words; unusable utterance");
  }
  Millis prev_start = 0;
  Millis prev_end = 0;
  for (std::size_t i = 0; i < trace.words.size(); ++i) {
    const auto& w = trace.words[i];
    auto where = "utterance '" + trace.utterance_id + "' word " + std::to_string(i) + " ('" +
                 w.text + "')";
    if (w.start_ms < 0 || w.end_ms < w.start_ms) throw InputError(where + ": bad interval");
    if (i > 0 && (w.start_ms < prev_start || w.start_ms < prev_end)) {
      throw InputError(where + ": overlaps or precedes the previous word");
    }
    prev_start = w.start_ms;
    prev_end = w.end_ms;
  }
  if (trace.words.back().end_ms <= 0) {
    throw InputError("utterance '" + trace.utterance_id + "' has zero duration");
  }
}

Millis speech_end_ms(const UtteranceTrace& trace) {
  validate_trace(trace);
  return trace.words.back().end_ms;
}

std::string prefix_text(const UtteranceTrace& trace, int n) {
  std::string out;
  for (int i = 0; i < n && i < static_cast<int>(trace.words.size()); ++i) {
    if (i > 0) out += ' ';
    out += trace.words[static_cast<std::size_t>(i)].text;
  }
  return out;
}

std::vector<Block> blocks_of(const UtteranceTrace& trace, Millis block_ms) {
  if (block_ms <= 0) throw InputError("block_ms must be > 0");
  const Millis end = speech_end_ms(trace);
  const auto count = static_cast<int>((end + block_ms - 1) / block_ms);

  std::vector<Block> blocks;
  blocks.reserve(static_cast<std::size_t>(count));
  int heard = 0;
  for (int b = 1; b <= count; ++b) {
    const Millis edge = static_cast<Millis>(b) * block_ms;
    while (heard < static_cast<int>(trace.words.size()) &&
           trace.words[static_cast<std::size_t>(heard)].end_ms <= edge) {
      ++heard;
    }
    blocks.push_back(Block{BlockIndex{b}, edge, std::min(edge, end), heard,
                           prefix_text(trace, heard)});
  }
  return blocks;
}

std::vector<int> missing_scripted_prefixes(const UtteranceTrace& trace, Millis block_ms) {
  std::vector<int> missing;
  for (const auto& block : blocks_of(trace, block_ms)) {
    if (!trace.scripted_queries.contains(block.prefix_words) &&
        std::find(missing.begin(), missing.end(), block.prefix_words) == missing.end()) {
      missing.push_back(block.prefix_words);
    }
  }
  return missing;
}

}  // namespace streamrag
