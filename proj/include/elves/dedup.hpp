#pragma once

#include <span>
#include <vector>

#include "elves/model.hpp"
#include "elves/sha256.hpp"

namespace elves {

// Whole-layer deduplication: layers are fingerprinted with SHA-256 and equal
// fingerprints collapse onto the first occurrence in scan order (models in
// input order, tensors in manifest order).

struct DedupRef {
  bool is_unique = true;   // first occurrence of its fingerprint
  uint64_t stored_id = 0;  // index into the stored-layer tables
};

struct DedupIndex {
  std::vector<Digest256> stored_digests;                     // stored_id -> digest
  std::vector<std::pair<uint32_t, uint32_t>> first_location; // stored_id -> (model, tensor)
  std::vector<uint32_t> occurrence_count;                    // stored_id -> references
  std::vector<std::vector<DedupRef>> models;                 // [model][tensor]

  bool is_duplicated(uint64_t stored_id) const { return occurrence_count[stored_id] > 1; }
};

Digest256 fingerprint_layer(std::span<const uint8_t> bytes);

// Fingerprinting runs layer-parallel; the index itself is built serially in
// scan order, so the result is independent of `workers`. With `paranoid` set,
// every fingerprint match is confirmed by a byte compare.
DedupIndex dedup_scan(std::span<const LoadedModel> models, bool paranoid = false,
                      unsigned workers = 1);

}  // namespace elves
