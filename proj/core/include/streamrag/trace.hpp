#pragma once

#include <string>
#include <vector>

#include "streamrag/types.hpp"

namespace streamrag {

/// One input block of an utterance and the transcript heard so far.
struct Block {
  BlockIndex index;
  /// Block window is (0, index * block_ms]; this is its upper edge.
  Millis window_end_ms = 0;
  /// When the block's audio is complete: the window edge, or the last word's
  /// end for the final block.
  Millis ready_ms = 0;
  /// Number of leading words fully heard by window_end_ms.
  int prefix_words = 0;
  std::string prefix_text;

  friend bool operator==(const Block&, const Block&) = default;
};

/// Throws InputError unless words are non-empty, non-overlapping and ordered.
void validate_trace(const UtteranceTrace& trace);

/// End of the last word.
Millis speech_end_ms(const UtteranceTrace& trace);

/// Splits an utterance into blocks of `block_ms`. A word belongs to block b's
/// prefix iff it ends at or before b * block_ms, so words straddling a block
/// edge wait for the next block. B = ceil(last end_ms / block_ms).
std::vector<Block> blocks_of(const UtteranceTrace& trace, Millis block_ms);

/// Space-joined text of the first `n` words.
std::string prefix_text(const UtteranceTrace& trace, int n);

/// Prefix lengths reached by `blocks_of(trace, block_ms)` that have no
/// scripted entry.
std::vector<int> missing_scripted_prefixes(const UtteranceTrace& trace, Millis block_ms);

}  // namespace streamrag
