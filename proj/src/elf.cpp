#include "elves/elf.hpp"

#include <cstring>

#include "elves/bitstream.hpp"
#include "elves/io_util.hpp"

namespace elves {

unsigned float_kind_width(FloatKind k) {
  switch (k) {
    case FloatKind::kF16: return 2;
    case FloatKind::kF32: return 4;
    default: return 8;
  }
}

unsigned float_kind_code_bits(FloatKind k) {
  switch (k) {
    case FloatKind::kF16: return ElfCodec<F16Layout>::kCodeBits;
    case FloatKind::kF32: return ElfCodec<F32Layout>::kCodeBits;
    default: return ElfCodec<F64Layout>::kCodeBits;
  }
}

double float_kind_error_bound(FloatKind k) {
  switch (k) {
    case FloatKind::kF16: return 0x1p-11;
    case FloatKind::kF32: return 0x1p-24;
    default: return 0x1p-53;
  }
}

const char* float_kind_name(FloatKind k) {
  switch (k) {
    case FloatKind::kF16: return "F16";
    case FloatKind::kF32: return "F32";
    default: return "F64";
  }
}

// 1 + |p| in the element's own precision, on raw patterns.
static uint16_t add_one_f16(uint16_t abs_bits) {
  // |p| < 1 here, so 1 + |p| needs at most 25 significand bits: the double
  // sum is exact and one double->half rounding equals a native half add.
  return double_to_f16_bits(1.0 + f16_bits_to_double(abs_bits));
}

template <class L>
std::optional<typename L::Bits> ElfCodec<L>::transform(Bits p) {
  auto d = FloatDecomposition<L>::split(p);
  if (d.exponent >= L::kBias) return std::nullopt;  // |p| >= 1, Inf, NaN
  Bits abs = Bits(p & ~(Bits(1) << (L::kTotalBits - 1)));
  Bits pp;
  if constexpr (L::kTotalBits == 16) {
    pp = add_one_f16(abs);
  } else if constexpr (L::kTotalBits == 32) {
    pp = f32_bits(1.0f + f32_from_bits(abs));
  } else {
    pp = f64_bits(1.0 + f64_from_bits(abs));
  }
  auto dp = FloatDecomposition<L>::split(pp);
  if (dp.exponent != L::kBias) return std::nullopt;  // rounded up to 2.0
  return Bits(Bits(d.sign) << L::kMantBits) | dp.mantissa;
}

template <class L>
typename L::Bits ElfCodec<L>::restore(Bits code) {
  Bits sign = Bits(code >> L::kMantBits);
  Bits mant = code & Bits((Bits(1) << L::kMantBits) - 1);
  Bits pp = Bits(Bits(L::kBias) << L::kMantBits) | mant;  // 1.mant * 2^0
  Bits r;
  if constexpr (L::kTotalBits == 16) {
    r = double_to_f16_bits(f16_bits_to_double(uint16_t(pp)) - 1.0);
  } else if constexpr (L::kTotalBits == 32) {
    r = f32_bits(f32_from_bits(pp) - 1.0f);
  } else {
    r = f64_bits(f64_from_bits(pp) - 1.0);
  }
  return r | Bits(sign << (L::kTotalBits - 1));
}

template struct ElfCodec<F16Layout>;
template struct ElfCodec<F32Layout>;
template struct ElfCodec<F64Layout>;

template <class L>
static ElfBlock compress_block(std::span<const typename L::Bits> patterns, FloatKind kind) {
  if (patterns.size() > UINT32_MAX) throw std::invalid_argument("elf: block too large");
  ElfBlock b;
  b.kind = kind;
  b.param_count = uint32_t(patterns.size());
  BitWriter bw;
  for (uint32_t i = 0; i < patterns.size(); ++i) {
    if (auto code = ElfCodec<L>::transform(patterns[i]))
      bw.write_bits(uint64_t(*code), ElfCodec<L>::kCodeBits);
    else
      b.exceptions.push_back({i, uint64_t(patterns[i])});
  }
  b.code_bits = bw.bit_count();
  b.code_bytes = bw.take_bytes();
  return b;
}

ElfBlock elf_compress_block(std::span<const uint16_t> f16_patterns) {
  return compress_block<F16Layout>(f16_patterns, FloatKind::kF16);
}
ElfBlock elf_compress_block(std::span<const float> params) {
  return compress_block<F32Layout>(
      {reinterpret_cast<const uint32_t*>(params.data()), params.size()}, FloatKind::kF32);
}
ElfBlock elf_compress_block(std::span<const double> params) {
  return compress_block<F64Layout>(
      {reinterpret_cast<const uint64_t*>(params.data()), params.size()}, FloatKind::kF64);
}

ElfBlock elf_compress_block_bytes(std::span<const uint8_t> data, FloatKind kind) {
  unsigned w = float_kind_width(kind);
  if (data.size() % w) throw std::invalid_argument("elf: byte count not a multiple of width");
  size_t n = data.size() / w;
  switch (kind) {
    case FloatKind::kF16: {
      std::vector<uint16_t> v(n);
      std::memcpy(v.data(), data.data(), data.size());
      return elf_compress_block(std::span<const uint16_t>(v));
    }
    case FloatKind::kF32: {
      std::vector<float> v(n);
      std::memcpy(v.data(), data.data(), data.size());
      return elf_compress_block(std::span<const float>(v));
    }
    default: {
      std::vector<double> v(n);
      std::memcpy(v.data(), data.data(), data.size());
      return elf_compress_block(std::span<const double>(v));
    }
  }
}

template <class L>
static void decompress_into(const ElfBlock& b, uint8_t* out) {
  using Bits = typename L::Bits;
  constexpr unsigned kWidth = L::kTotalBits / 8;
  BitReader br(b.code_bytes, b.code_bits);
  size_t next_exc = 0;
  for (uint32_t i = 0; i < b.param_count; ++i) {
    Bits pat;
    if (next_exc < b.exceptions.size() && b.exceptions[next_exc].index == i) {
      pat = Bits(b.exceptions[next_exc].raw_bits);
      ++next_exc;
    } else {
      pat = ElfCodec<L>::restore(Bits(br.read_bits(ElfCodec<L>::kCodeBits)));
    }
    std::memcpy(out + size_t(i) * kWidth, &pat, kWidth);
  }
  if (next_exc != b.exceptions.size())
    throw CorruptionError("elf: exception index out of range");
  if (br.remaining_bits() != 0)
    throw CorruptionError("elf: trailing code bits");
}

std::vector<uint8_t> elf_decompress_block(const ElfBlock& b) {
  std::vector<uint8_t> out(size_t(b.param_count) * float_kind_width(b.kind));
  switch (b.kind) {
    case FloatKind::kF16: decompress_into<F16Layout>(b, out.data()); break;
    case FloatKind::kF32: decompress_into<F32Layout>(b, out.data()); break;
    default: decompress_into<F64Layout>(b, out.data()); break;
  }
  return out;
}

std::vector<uint8_t> serialize_elf_block(const ElfBlock& b) {
  std::vector<uint8_t> out;
  out.reserve(16 + b.exceptions.size() * 10 + b.code_bytes.size());
  put_le<uint32_t>(out, b.param_count);
  put_le<uint32_t>(out, uint32_t(b.exceptions.size()));
  put_le<uint64_t>(out, b.code_bits);
  uint32_t prev = 0;
  bool first = true;
  for (const auto& e : b.exceptions) {
    put_leb128(out, first ? e.index : uint64_t(e.index - prev));
    prev = e.index;
    first = false;
  }
  unsigned w = float_kind_width(b.kind);
  for (const auto& e : b.exceptions)
    for (unsigned i = 0; i < w; ++i) out.push_back(uint8_t(e.raw_bits >> (8 * i)));
  out.insert(out.end(), b.code_bytes.begin(), b.code_bytes.end());
  return out;
}

ElfBlock parse_elf_block(std::span<const uint8_t> payload, FloatKind kind) {
  ByteReader r(payload, "elf block");
  ElfBlock b;
  b.kind = kind;
  b.param_count = r.get_le<uint32_t>();
  uint32_t exc_count = r.get_le<uint32_t>();
  b.code_bits = r.get_le<uint64_t>();
  if (exc_count > b.param_count)
    throw CorruptionError("elf block: more exceptions than parameters");
  unsigned code_bits_per = float_kind_code_bits(kind);
  uint64_t expect_bits = uint64_t(b.param_count - exc_count) * code_bits_per;
  if (b.code_bits != expect_bits)
    throw CorruptionError("elf block: code bit length mismatch");
  b.exceptions.reserve(exc_count);
  uint64_t pos = 0;
  for (uint32_t i = 0; i < exc_count; ++i) {
    uint64_t delta = r.get_leb128();
    pos = i == 0 ? delta : pos + delta;
    if ((i != 0 && delta == 0) || pos >= b.param_count)
      throw CorruptionError("elf block: exception positions not strictly increasing");
    b.exceptions.push_back({uint32_t(pos), 0});
  }
  unsigned w = float_kind_width(kind);
  for (auto& e : b.exceptions) {
    auto bytes = r.get_bytes(w);
    uint64_t v = 0;
    for (unsigned i = 0; i < w; ++i) v |= uint64_t(bytes[i]) << (8 * i);
    e.raw_bits = v;
  }
  size_t code_bytes = size_t((b.code_bits + 7) / 8);
  auto cb = r.get_bytes(code_bytes);
  b.code_bytes.assign(cb.begin(), cb.end());
  if (b.code_bits % 8 != 0 && !b.code_bytes.empty() &&
      (b.code_bytes.back() & ((1u << (8 - b.code_bits % 8)) - 1)) != 0)
    throw CorruptionError("elf block: nonzero padding bits");
  if (!r.at_end()) throw CorruptionError("elf block: trailing bytes");
  return b;
}

}  // namespace elves
