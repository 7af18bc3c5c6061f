#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "elves/errors.hpp"

namespace elves {

// Bit-packed I/O, MSB-first within each byte: the first bit written lands in
// bit 7 of byte 0. Field widths are 1..64; the final byte of a stream is
// zero-padded and the padding is not part of the logical length.

class BitWriter {
 public:
  void write_bits(uint64_t value, unsigned width) {
    if (width < 1 || width > 64) throw std::invalid_argument("BitWriter: bad width");
    if (width < 64 && (value >> width) != 0)
      throw std::invalid_argument("BitWriter: value wider than field");
    unsigned rem = width;
    while (rem > 0) {
      unsigned used = unsigned(bits_ & 7);
      if (used == 0) buf_.push_back(0);
      unsigned take = 8 - used < rem ? 8 - used : rem;
      uint8_t chunk = uint8_t((value >> (rem - take)) & ((1u << take) - 1));
      buf_.back() |= uint8_t(chunk << (8 - used - take));
      bits_ += take;
      rem -= take;
    }
  }

  uint64_t bit_count() const { return bits_; }
  const std::vector<uint8_t>& bytes() const { return buf_; }
  std::vector<uint8_t> take_bytes() { return std::move(buf_); }

 private:
  std::vector<uint8_t> buf_;
  uint64_t bits_ = 0;
};

class BitReader {
 public:
  // `limit_bits` is the logical stream length; reads past it throw
  // EndOfStream and leave the cursor untouched.
  explicit BitReader(std::span<const uint8_t> data)
      : BitReader(data, uint64_t(data.size()) * 8) {}
  BitReader(std::span<const uint8_t> data, uint64_t limit_bits)
      : data_(data), limit_(limit_bits) {
    if (limit_ > uint64_t(data_.size()) * 8)
      throw CorruptionError("BitReader: logical length exceeds buffer");
  }

  uint64_t read_bits(unsigned width) {
    if (width < 1 || width > 64) throw std::invalid_argument("BitReader: bad width");
    if (limit_ - pos_ < width) throw EndOfStream("bit stream underrun");
    uint64_t v = 0;
    unsigned rem = width;
    while (rem > 0) {
      unsigned used = unsigned(pos_ & 7);
      unsigned take = 8 - used < rem ? 8 - used : rem;
      uint8_t byte = data_[size_t(pos_ >> 3)];
      uint8_t chunk = uint8_t(byte >> (8 - used - take)) & uint8_t((1u << take) - 1);
      v = (v << take) | chunk;
      pos_ += take;
      rem -= take;
    }
    return v;
  }

  uint64_t position_bits() const { return pos_; }
  uint64_t remaining_bits() const { return limit_ - pos_; }

 private:
  std::span<const uint8_t> data_;
  uint64_t limit_;
  uint64_t pos_ = 0;
};

}  // namespace elves
