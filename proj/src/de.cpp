#include "elves/de.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

#include "elves/bitstream.hpp"
#include "elves/io_util.hpp"

namespace elves {

namespace {

// Open-addressing pattern -> last-position map. Streams run to tens of
// millions of entries, so 16 bytes per slot beats a node-based map by a lot.
class LastPosMap {
 public:
  explicit LastPosMap(size_t expected) {
    size_t cap = 1024;
    while (cap * 5 < expected * 8) cap <<= 1;
    slots_.assign(cap, Slot{0, kEmpty});
  }

  // Returns previous position or kEmpty, then stores `pos`.
  uint64_t exchange(uint64_t key, uint64_t pos) {
    if ((size_ + 1) * 8 > slots_.size() * 5) grow();
    Slot* s = find(key);
    uint64_t old = s->pos;
    if (old == kEmpty) {
      s->key = key;
      ++size_;
    }
    s->pos = pos;
    return old;
  }

  static constexpr uint64_t kEmpty = UINT64_MAX;

 private:
  struct Slot {
    uint64_t key;
    uint64_t pos;
  };

  static uint64_t mix(uint64_t x) {  // splitmix64 finalizer
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  Slot* find(uint64_t key) {
    size_t mask = slots_.size() - 1;
    size_t i = size_t(mix(key)) & mask;
    while (slots_[i].pos != kEmpty && slots_[i].key != key) i = (i + 1) & mask;
    return &slots_[i];
  }

  void grow() {
    std::vector<Slot> old = std::move(slots_);
    slots_.assign(old.size() * 2, Slot{0, kEmpty});
    for (const Slot& s : old)
      if (s.pos != kEmpty) {
        Slot* d = find(s.key);
        *d = s;
      }
  }

  std::vector<Slot> slots_;
  size_t size_ = 0;
};

template <class T>
DeStream compress(std::span<const T> patterns, unsigned max_distance_bits) {
  if (max_distance_bits < 1 || max_distance_bits > 31)
    throw std::invalid_argument("de: max_distance_bits must be in [1,31]");
  const uint64_t max_distance = (uint64_t(1) << max_distance_bits) - 1;
  DeStream s;
  s.elem_width = sizeof(T);
  s.param_count = patterns.size();
  BitWriter bw;
  LastPosMap last(patterns.size() < 4096 ? patterns.size() : patterns.size() / 4);
  for (uint64_t i = 0; i < patterns.size(); ++i) {
    uint64_t key = patterns[i];
    uint64_t prev = last.exchange(key, i);
    uint64_t d = i - prev;  // meaningless if prev == kEmpty
    if (prev != LastPosMap::kEmpty && d <= max_distance) {
      unsigned len = unsigned(std::bit_width(d));
      bw.write_bits(1, 1);
      bw.write_bits(len, 5);
      bw.write_bits(d, len);
    } else {
      bw.write_bits(0, 1);
      s.distinct.push_back(key);
    }
  }
  s.bitmap_bits = bw.bit_count();
  s.bitmap = bw.take_bytes();
  return s;
}

}  // namespace

DeStream de_compress(std::span<const uint32_t> patterns, unsigned max_distance_bits) {
  return compress(patterns, max_distance_bits);
}
DeStream de_compress(std::span<const uint64_t> patterns, unsigned max_distance_bits) {
  return compress(patterns, max_distance_bits);
}

DeStream de_compress_bytes(std::span<const uint8_t> data, unsigned elem_width) {
  if (elem_width != 4 && elem_width != 8)
    throw std::invalid_argument("de: element width must be 4 or 8");
  if (data.size() % elem_width) throw std::invalid_argument("de: byte count not a multiple of width");
  size_t n = data.size() / elem_width;
  if (elem_width == 4) {
    std::vector<uint32_t> v(n);
    std::memcpy(v.data(), data.data(), data.size());
    return de_compress(std::span<const uint32_t>(v));
  }
  std::vector<uint64_t> v(n);
  std::memcpy(v.data(), data.data(), data.size());
  return de_compress(std::span<const uint64_t>(v));
}

std::vector<uint8_t> de_decompress_bytes(const DeStream& s) {
  if (s.elem_width != 4 && s.elem_width != 8)
    throw CorruptionError("de stream: bad element width");
  BitReader br(s.bitmap, s.bitmap_bits);
  std::vector<uint64_t> out;
  out.reserve(size_t(s.param_count));
  size_t next_distinct = 0;
  for (uint64_t i = 0; i < s.param_count; ++i) {
    if (br.read_bits(1)) {
      unsigned len = unsigned(br.read_bits(5));
      if (len == 0) throw CorruptionError("de stream: zero-length distance field");
      uint64_t d = br.read_bits(len);
      if (d == 0 || d > i) throw CorruptionError("de stream: distance out of range");
      out.push_back(out[size_t(i - d)]);
    } else {
      if (next_distinct >= s.distinct.size())
        throw CorruptionError("de stream: distinct array exhausted");
      out.push_back(s.distinct[next_distinct++]);
    }
  }
  if (br.remaining_bits() != 0) throw CorruptionError("de stream: trailing bitmap bits");
  if (next_distinct != s.distinct.size())
    throw CorruptionError("de stream: unused distinct entries");
  std::vector<uint8_t> bytes(out.size() * s.elem_width);
  for (size_t i = 0; i < out.size(); ++i)
    for (unsigned b = 0; b < s.elem_width; ++b)
      bytes[i * s.elem_width + b] = uint8_t(out[i] >> (8 * b));
  return bytes;
}

DeSavingReport de_saving_report(const DeStream& s) {
  DeSavingReport r;
  r.param_count = s.param_count;
  const uint64_t elem_bits = uint64_t(s.elem_width) * 8;
  r.original_bits = s.param_count * elem_bits;
  r.practical_bits = s.bitmap_bits + uint64_t(s.distinct.size()) * elem_bits;
  // Walk the bitmap to recover each repeat's distance field width.
  BitReader br(s.bitmap, s.bitmap_bits);
  uint64_t saved_bits = 0;
  for (uint64_t i = 0; i < s.param_count; ++i) {
    if (br.read_bits(1)) {
      unsigned len = unsigned(br.read_bits(5));
      if (len == 0) throw CorruptionError("de stream: zero-length distance field");
      br.read_bits(len);
      ++r.dup_count;
      saved_bits += elem_bits - len;
    }
  }
  if (r.original_bits > 0) {
    r.theoretical_saving = double(saved_bits) / double(r.original_bits);
    r.practical_saving = 1.0 - double(r.practical_bits) / double(r.original_bits);
  }
  return r;
}

std::vector<uint8_t> serialize_de_stream(const DeStream& s) {
  if (s.param_count > UINT32_MAX) throw std::invalid_argument("de: stream too large");
  std::vector<uint8_t> out;
  out.reserve(12 + s.bitmap.size() + s.distinct.size() * s.elem_width);
  put_le<uint32_t>(out, uint32_t(s.param_count));
  put_le<uint64_t>(out, s.bitmap_bits);
  out.insert(out.end(), s.bitmap.begin(), s.bitmap.end());
  for (uint64_t v : s.distinct)
    for (unsigned b = 0; b < s.elem_width; ++b) out.push_back(uint8_t(v >> (8 * b)));
  return out;
}

DeStream parse_de_stream(std::span<const uint8_t> payload, unsigned elem_width) {
  if (elem_width != 4 && elem_width != 8)
    throw std::invalid_argument("de: element width must be 4 or 8");
  ByteReader r(payload, "de stream");
  DeStream s;
  s.elem_width = elem_width;
  s.param_count = r.get_le<uint32_t>();
  s.bitmap_bits = r.get_le<uint64_t>();
  if (s.bitmap_bits < s.param_count || s.bitmap_bits > uint64_t(37) * s.param_count)
    throw CorruptionError("de stream: bitmap bit length implausible");
  auto bm = r.get_bytes(size_t((s.bitmap_bits + 7) / 8));
  s.bitmap.assign(bm.begin(), bm.end());
  if (s.bitmap_bits % 8 != 0 && !s.bitmap.empty() &&
      (s.bitmap.back() & ((1u << (8 - s.bitmap_bits % 8)) - 1)) != 0)
    throw CorruptionError("de stream: nonzero padding bits");
  size_t rest = r.remaining();
  if (rest % elem_width) throw CorruptionError("de stream: distinct payload misaligned");
  size_t count = rest / elem_width;
  s.distinct.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    auto bytes = r.get_bytes(elem_width);
    uint64_t v = 0;
    for (unsigned b = 0; b < elem_width; ++b) v |= uint64_t(bytes[b]) << (8 * b);
    s.distinct.push_back(v);
  }
  return s;
}

}  // namespace elves
