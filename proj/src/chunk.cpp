#include "elves/chunk.hpp"

#include <array>
#include <bit>
#include <random>
#include <stdexcept>

namespace elves {

std::vector<ChunkRecord> fsc_chunks(std::span<const uint8_t> data, size_t chunk_size) {
  if (chunk_size == 0) throw std::invalid_argument("fsc: chunk size must be positive");
  std::vector<ChunkRecord> out;
  out.reserve(data.size() / chunk_size + 1);
  for (size_t pos = 0; pos < data.size(); pos += chunk_size) {
    size_t len = std::min(chunk_size, data.size() - pos);
    out.push_back({pos, len, sha256(data.subspan(pos, len))});
  }
  return out;
}

namespace {

struct GearTables {
  std::array<uint64_t, 256> gear;
  uint64_t strict_mask;  // used before the average target
  uint64_t loose_mask;   // used after it
};

// Table and masks are fixed for all time: both derive from one seeded
// mt19937_64 stream, masks by accumulating distinct random bit positions
// (so the loose mask's bits are a subset of the strict mask's).
GearTables make_tables(unsigned target_bits) {
  GearTables t{};
  std::mt19937_64 eng(0x6368756E6BULL);
  for (auto& g : t.gear) g = eng();
  unsigned strict_bits = target_bits + 2;
  unsigned loose_bits = target_bits > 2 ? target_bits - 2 : 1;
  uint64_t acc = 0;
  unsigned have = 0;
  while (have < strict_bits) {
    uint64_t bit = uint64_t(1) << (eng() & 63);
    if (acc & bit) continue;
    acc |= bit;
    ++have;
    if (have == loose_bits) t.loose_mask = acc;
  }
  t.strict_mask = acc;
  return t;
}

const GearTables& tables_for(unsigned target_bits) {
  static std::array<GearTables, 33> cache = [] {
    std::array<GearTables, 33> c{};
    for (unsigned b = 1; b <= 32; ++b) c[b] = make_tables(b);
    return c;
  }();
  if (target_bits < 1 || target_bits > 32) throw std::invalid_argument("cdc: bad average size");
  return cache[target_bits];
}

void check_config(const CdcConfig& cfg) {
  if (cfg.min_size == 0 || cfg.min_size >= cfg.avg_size || cfg.avg_size > cfg.max_size)
    throw std::invalid_argument("cdc: require 0 < min < avg <= max");
  if (!std::has_single_bit(cfg.avg_size)) throw std::invalid_argument("cdc: avg size must be a power of two");
}

}  // namespace

size_t cdc_next_boundary(std::span<const uint8_t> data, const CdcConfig& cfg) {
  check_config(cfg);
  const GearTables& t = tables_for(unsigned(std::bit_width(cfg.avg_size) - 1));
  size_t n = std::min(data.size(), cfg.max_size);
  if (data.size() <= cfg.min_size) return data.size();
  size_t normal = std::min(n, cfg.avg_size);
  uint64_t fp = 0;
  size_t i = cfg.min_size;
  for (; i < normal; ++i) {
    fp = (fp << 1) + t.gear[data[i]];
    if (!(fp & t.strict_mask)) return i + 1;
  }
  for (; i < n; ++i) {
    fp = (fp << 1) + t.gear[data[i]];
    if (!(fp & t.loose_mask)) return i + 1;
  }
  return n;
}

std::vector<ChunkRecord> cdc_chunks(std::span<const uint8_t> data, const CdcConfig& cfg) {
  check_config(cfg);
  std::vector<ChunkRecord> out;
  size_t pos = 0;
  while (pos < data.size()) {
    size_t len = cdc_next_boundary(data.subspan(pos), cfg);
    out.push_back({pos, len, sha256(data.subspan(pos, len))});
    pos += len;
  }
  return out;
}

Digest256 similarity_signature(std::span<const uint8_t> data, unsigned elem_width,
                               unsigned stride) {
  if (elem_width == 0 || stride == 0)
    throw std::invalid_argument("similarity: width and stride must be positive");
  if (data.size() % elem_width)
    throw std::invalid_argument("similarity: data not a whole number of elements");
  size_t count = data.size() / elem_width;
  Sha256 h;
  for (size_t i = 0; i < count; i += stride)
    h.update(data.subspan(i * size_t(elem_width), elem_width));
  return h.finish();
}

}  // namespace elves
