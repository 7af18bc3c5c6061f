#include "elves/dedup.hpp"

#include <cstring>
#include <map>

#include "elves/thread.hpp"

namespace elves {

Digest256 fingerprint_layer(std::span<const uint8_t> bytes) { return sha256(bytes); }

DedupIndex dedup_scan(std::span<const LoadedModel> models, bool paranoid, unsigned workers) {
  struct Task {
    uint32_t model, tensor;
  };
  std::vector<Task> tasks;
  for (uint32_t m = 0; m < models.size(); ++m)
    for (uint32_t t = 0; t < models[m].manifest.tensors.size(); ++t) tasks.push_back({m, t});

  std::vector<Digest256> digests(tasks.size());
  parallel_for(tasks.size(), workers, [&](size_t i) {
    digests[i] = fingerprint_layer(models[tasks[i].model].layer_bytes(tasks[i].tensor));
  });

  DedupIndex idx;
  idx.models.resize(models.size());
  std::map<Digest256, uint64_t> seen;
  for (size_t i = 0; i < tasks.size(); ++i) {
    auto [m, t] = tasks[i];
    auto [it, fresh] = seen.try_emplace(digests[i], idx.stored_digests.size());
    if (fresh) {
      idx.stored_digests.push_back(digests[i]);
      idx.first_location.emplace_back(m, t);
      idx.occurrence_count.push_back(1);
      idx.models[m].push_back({true, it->second});
    } else {
      uint64_t id = it->second;
      if (paranoid) {
        auto [fm, ft] = idx.first_location[id];
        auto a = models[fm].layer_bytes(ft);
        auto b = models[m].layer_bytes(t);
        if (a.size() != b.size() || (a.size() && std::memcmp(a.data(), b.data(), a.size()) != 0))
          throw std::runtime_error("dedup: fingerprint collision between model '" +
                                   models[fm].manifest.model_id + "' tensor '" +
                                   models[fm].manifest.tensors[ft].name + "' and model '" +
                                   models[m].manifest.model_id + "' tensor '" +
                                   models[m].manifest.tensors[t].name + "'");
      }
      ++idx.occurrence_count[id];
      idx.models[m].push_back({false, id});
    }
  }
  return idx;
}

}  // namespace elves
