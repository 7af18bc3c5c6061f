#include "elves/backend.hpp"

#include <zlib.h>

#include "elves/errors.hpp"

namespace elves {

namespace {

class StoreBackend final : public LosslessBackend {
 public:
  uint32_t id() const override { return kBackendStore; }
  std::string_view name() const override { return "store"; }
  std::vector<uint8_t> compress(std::span<const uint8_t> raw) const override {
    return {raw.begin(), raw.end()};
  }
  std::vector<uint8_t> decompress(std::span<const uint8_t> comp, size_t raw_size) const override {
    if (comp.size() != raw_size) throw CorruptionError("store backend: size mismatch");
    return {comp.begin(), comp.end()};
  }
};

class DeflateBackend final : public LosslessBackend {
 public:
  static constexpr int kLevel = 5;

  uint32_t id() const override { return kBackendDeflate; }
  std::string_view name() const override { return "deflate"; }

  std::vector<uint8_t> compress(std::span<const uint8_t> raw) const override {
    if (raw.empty()) return {};
    uLongf bound = compressBound(uLong(raw.size()));
    std::vector<uint8_t> out(bound);
    int rc = compress2(out.data(), &bound, raw.data(), uLong(raw.size()), kLevel);
    if (rc != Z_OK) throw std::runtime_error("deflate: compress2 failed");
    out.resize(bound);
    return out;
  }

  std::vector<uint8_t> decompress(std::span<const uint8_t> comp, size_t raw_size) const override {
    if (raw_size == 0) {
      if (!comp.empty()) throw CorruptionError("deflate: data where none expected");
      return {};
    }
    std::vector<uint8_t> out(raw_size);
    uLongf got = uLong(raw_size);
    int rc = uncompress(out.data(), &got, comp.data(), uLong(comp.size()));
    if (rc != Z_OK || got != raw_size)
      throw CorruptionError("deflate: corrupt or truncated stream");
    return out;
  }
};

const StoreBackend g_store;
const DeflateBackend g_deflate;
const LosslessBackend* const g_backends[] = {&g_store, &g_deflate};

}  // namespace

const LosslessBackend* find_backend(uint32_t id) {
  for (const LosslessBackend* b : g_backends)
    if (b->id() == id) return b;
  return nullptr;
}

const LosslessBackend* find_backend_by_name(std::string_view name) {
  for (const LosslessBackend* b : g_backends)
    if (b->name() == name) return b;
  return nullptr;
}

const LosslessBackend& default_backend() { return g_deflate; }

std::vector<const LosslessBackend*> all_backends() {
  return {g_backends, g_backends + std::size(g_backends)};
}

}  // namespace elves
