#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace elves {

// Duplicate-parameter coding for 32- and 64-bit float streams, on raw bit
// patterns (so NaN payloads and -0.0 dedup deterministically).
//
// Per parameter, the bitmap carries a flag bit: 0 = first occurrence (its
// pattern goes to `distinct`), 1 = repeat, followed by a 5-bit L = bit length
// of D and the L-bit distance D back to the most recent occurrence, counted
// in parameters (D = 1 is the immediate predecessor). D is capped at 2^31-1;
// anything farther is re-emitted as distinct.

struct DeStream {
  unsigned elem_width = 4;  // bytes per element: 4 or 8
  uint64_t param_count = 0;
  uint64_t bitmap_bits = 0;        // logical bit length of `bitmap`
  std::vector<uint8_t> bitmap;     // flag/L/D fields, MSB-first
  std::vector<uint64_t> distinct;  // patterns in first-occurrence order
};

struct DeSavingReport {
  uint64_t param_count = 0;
  uint64_t dup_count = 0;
  uint64_t original_bits = 0;
  uint64_t practical_bits = 0;     // bitmap bits + distinct payload bits
  double theoretical_saving = 0;   // sum over dups of (elem_bits - L) / original
  double practical_saving = 0;     // 1 - practical_bits / original_bits
};

// `max_distance_bits` narrows the distance cap; only tests use it.
DeStream de_compress(std::span<const uint32_t> patterns, unsigned max_distance_bits = 31);
DeStream de_compress(std::span<const uint64_t> patterns, unsigned max_distance_bits = 31);
// Raw little-endian element bytes, width 4 or 8.
DeStream de_compress_bytes(std::span<const uint8_t> data, unsigned elem_width);

std::vector<uint8_t> de_decompress_bytes(const DeStream& s);

DeSavingReport de_saving_report(const DeStream& s);

// Wire form: u32 param_count, u64 bitmap bit length, padded bitmap bytes,
// distinct patterns as little-endian elements.
std::vector<uint8_t> serialize_de_stream(const DeStream& s);
DeStream parse_de_stream(std::span<const uint8_t> payload, unsigned elem_width);

}  // namespace elves
