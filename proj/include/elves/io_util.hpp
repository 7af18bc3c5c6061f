#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "elves/errors.hpp"

namespace elves {

// ---- little-endian scalar packing --------------------------------------

template <class T>
inline void put_le(std::vector<uint8_t>& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(uint8_t(v >> (8 * i)));
}

// Cursor-based reader over a byte span; every read is bounds-checked so a
// truncated buffer surfaces as CorruptionError, never as an overread.
class ByteReader {
 public:
  ByteReader(std::span<const uint8_t> data, std::string what)
      : data_(data), what_(std::move(what)) {}

  template <class T>
  T get_le() {
    static_assert(std::is_unsigned_v<T>);
    need(sizeof(T));
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= T(data_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  std::span<const uint8_t> get_bytes(size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::string get_string() {
    uint32_t n = get_le<uint32_t>();
    auto s = get_bytes(n);
    return std::string(reinterpret_cast<const char*>(s.data()), s.size());
  }

  uint64_t get_leb128();

  size_t pos() const { return pos_; }
  size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

  void need(size_t n) const {
    if (n > data_.size() - pos_)
      throw CorruptionError(what_ + ": truncated (need " + std::to_string(n) +
                            " bytes at offset " + std::to_string(pos_) + ", have " +
                            std::to_string(data_.size() - pos_) + ")");
  }

 private:
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
  std::string what_;
};

inline void put_string(std::vector<uint8_t>& out, std::string_view s) {
  put_le<uint32_t>(out, uint32_t(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

// Unsigned LEB128 (7 bits per byte, high bit = continuation).
void put_leb128(std::vector<uint8_t>& out, uint64_t v);

// ---- CRC32C (Castagnoli) -----------------------------------------------

uint32_t crc32c(std::span<const uint8_t> data, uint32_t seed = 0);

// ---- whole-file helpers ------------------------------------------------

std::vector<uint8_t> read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, std::span<const uint8_t> data);
// Writes to a sibling temp file, then renames onto `p`; an interrupted run
// never leaves a half-written file under the final name.
void write_file_atomic(const std::filesystem::path& p, std::span<const uint8_t> data);

}  // namespace elves
