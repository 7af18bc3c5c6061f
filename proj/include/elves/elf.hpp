#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "elves/fp.hpp"

namespace elves {

// Exponent-less float coding for parameters in (-1, 1).
//
// For such a parameter p the value p' = 1 + |p| lies in [1, 2), so its
// exponent field is a constant and only the sign and mantissa carry
// information. We store exactly 1 + mantissa_bits per parameter:
//
//   binary16: 11 bits   binary32: 24 bits   binary64: 53 bits
//
// p' is computed in the parameter's own precision with round-to-nearest-even,
// which costs at most half an ulp of [1,2): 2^-11 / 2^-24 / 2^-53. Restoring
// p' - 1 is exact (both operands share a binade), so that is the whole error.
// Anything else - NaN, infinities, |p| >= 1, and values so close to 1 that
// 1 + |p| rounds up to 2.0 - is out of range and kept verbatim in a side
// table of (position, raw bits) exceptions.

enum class FloatKind : uint8_t { kF16 = 0, kF32 = 1, kF64 = 2 };

unsigned float_kind_width(FloatKind k);      // bytes per element
unsigned float_kind_code_bits(FloatKind k);  // 11 / 24 / 53
double float_kind_error_bound(FloatKind k);  // 2^-11 / 2^-24 / 2^-53
const char* float_kind_name(FloatKind k);

template <class L>
struct ElfCodec {
  using Bits = typename L::Bits;
  static constexpr unsigned kCodeBits = 1 + L::kMantBits;

  // Raw pattern -> packed code, or nullopt if out of range.
  static std::optional<Bits> transform(Bits p);
  // Packed code -> raw pattern of the restored value.
  static Bits restore(Bits code);
};

struct ElfException {
  uint32_t index;     // parameter position within the block
  uint64_t raw_bits;  // original pattern, element-width low bits
};

struct ElfBlock {
  FloatKind kind = FloatKind::kF32;
  uint32_t param_count = 0;
  std::vector<ElfException> exceptions;  // strictly increasing index
  uint64_t code_bits = 0;                // logical length of code_bytes
  std::vector<uint8_t> code_bytes;       // in-range codes, bit-packed
};

ElfBlock elf_compress_block(std::span<const uint16_t> f16_patterns);
ElfBlock elf_compress_block(std::span<const float> params);
ElfBlock elf_compress_block(std::span<const double> params);
// Raw little-endian element bytes; size must be a multiple of the width.
ElfBlock elf_compress_block_bytes(std::span<const uint8_t> data, FloatKind kind);

// Inverse: raw little-endian element bytes (param_count * width of them).
std::vector<uint8_t> elf_decompress_block(const ElfBlock& block);

// Wire form: u32 param_count, u32 exception_count, u64 code bit length,
// exception positions as varint deltas, exception raw bits, packed codes.
std::vector<uint8_t> serialize_elf_block(const ElfBlock& block);
ElfBlock parse_elf_block(std::span<const uint8_t> payload, FloatKind kind);

}  // namespace elves
