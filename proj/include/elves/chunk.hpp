#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "elves/sha256.hpp"

namespace elves {

struct ChunkRecord {
  uint64_t offset = 0;
  uint64_t length = 0;
  Digest256 digest;
};

// Fixed-size chunking; the final chunk may be short.
std::vector<ChunkRecord> fsc_chunks(std::span<const uint8_t> data, size_t chunk_size);

// Content-defined chunking in the FastCDC style: a gear rolling hash with
// normalized masks (a stricter mask before the average target, a looser one
// after). Boundaries depend only on chunk content, so equal regions re-align
// after at most max_size bytes.
struct CdcConfig {
  size_t min_size = 128;
  size_t avg_size = 4096;  // power of two
  size_t max_size = 128 * 1024;
};

// Length of the first chunk of `data` (bounds checked against the config).
size_t cdc_next_boundary(std::span<const uint8_t> data, const CdcConfig& cfg = {});
std::vector<ChunkRecord> cdc_chunks(std::span<const uint8_t> data, const CdcConfig& cfg = {});

// Similarity fingerprint: SHA-256 over every stride-th element (element 0
// included). `elem_width` is 1 for raw byte chunks or the dtype width for
// parameter data.
Digest256 similarity_signature(std::span<const uint8_t> data, unsigned elem_width,
                               unsigned stride = 32);

}  // namespace elves
