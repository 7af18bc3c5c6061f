#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "elves/model.hpp"

namespace elves {

// Deterministic synthetic model corpora for tests and benchmarks. A layer's
// bytes depend only on (seed, dtype, params), so giving two layers the same
// explicit seed makes them byte-identical even across models.

struct SynthLayer {
  std::string name;  // auto-generated when empty
  DtypeTag dtype = DtypeTag::kF32;
  uint64_t params = 0;
  uint64_t seed = 0;  // 0 = derive from the model seed and layer index
};

struct SynthModel {
  std::string id;
  uint64_t seed = 1;
  std::vector<SynthLayer> layers;
  double in_range_fraction = 0.99;  // fresh float values drawn inside (-1, 1)
  double dup_ratio = 0.0;           // chance a float value repeats an earlier one
  double dup_distance_mean = 256;   // geometric mean of repeat distances
  double special_fraction = 0.0;    // NaN/Inf share of out-of-range values
  unsigned copies = 1;              // byte-identical copies, ids suffixed _0.._k
};

LoadedModel synth_model(const SynthModel& spec);
// Expands `copies` into distinct models with identical bytes.
std::vector<LoadedModel> synth_corpus(const std::vector<SynthModel>& specs);
void write_synth_corpus(const std::vector<SynthModel>& specs,
                        const std::filesystem::path& dir);

// JSON spec: {"models": [{"id", "seed", "copies", "in_range_fraction",
// "dup_ratio", "dup_distance_mean", "special_fraction",
// "layers": [{"name", "dtype", "params", "seed"}]}]}
std::vector<SynthModel> parse_synth_spec(const std::string& json_text);

}  // namespace elves
