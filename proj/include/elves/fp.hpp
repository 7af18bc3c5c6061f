#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

namespace elves {

// IEEE 754 binary16/32/64 layout constants and bit-level helpers. Everything
// here works on raw bit patterns so NaN payloads and -0.0 survive untouched.

struct F16Layout {
  using Bits = uint16_t;
  static constexpr unsigned kExpBits = 5, kMantBits = 10, kTotalBits = 16;
  static constexpr unsigned kBias = 15;
};
struct F32Layout {
  using Bits = uint32_t;
  static constexpr unsigned kExpBits = 8, kMantBits = 23, kTotalBits = 32;
  static constexpr unsigned kBias = 127;
};
struct F64Layout {
  using Bits = uint64_t;
  static constexpr unsigned kExpBits = 11, kMantBits = 52, kTotalBits = 64;
  static constexpr unsigned kBias = 1023;
};

template <class L>
struct FloatDecomposition {
  using Bits = typename L::Bits;
  unsigned sign = 0;  // 0 or 1
  Bits exponent = 0;  // raw biased field
  Bits mantissa = 0;

  static FloatDecomposition split(Bits b) {
    FloatDecomposition d;
    d.sign = unsigned(b >> (L::kTotalBits - 1));
    d.exponent = Bits(b >> L::kMantBits) & Bits((Bits(1) << L::kExpBits) - 1);
    d.mantissa = b & Bits((Bits(1) << L::kMantBits) - 1);
    return d;
  }
  Bits recompose() const {
    return Bits(Bits(sign) << (L::kTotalBits - 1)) | Bits(exponent << L::kMantBits) | mantissa;
  }
};

inline uint32_t f32_bits(float v) { return std::bit_cast<uint32_t>(v); }
inline float f32_from_bits(uint32_t b) { return std::bit_cast<float>(b); }
inline uint64_t f64_bits(double v) { return std::bit_cast<uint64_t>(v); }
inline double f64_from_bits(uint64_t b) { return std::bit_cast<double>(b); }

// binary16 <-> double. The toolchain here has no native _Float16, but every
// half value is exactly representable in double, so the widening direction is
// exact and the narrowing direction needs only one round-to-nearest-even.
inline double f16_bits_to_double(uint16_t h) {
  unsigned s = h >> 15, e = (h >> 10) & 0x1F;
  unsigned m = h & 0x3FF;
  double v;
  if (e == 0)
    v = std::ldexp(double(m), -24);
  else if (e == 31)
    v = m ? std::numeric_limits<double>::quiet_NaN() : std::numeric_limits<double>::infinity();
  else
    v = std::ldexp(double(1024 + m), int(e) - 25);
  return s ? -v : v;
}

inline uint16_t double_to_f16_bits(double v) {
  uint16_t sign = uint16_t((f64_bits(v) >> 63) << 15);
  if (std::isnan(v)) return 0x7E00;  // canonical quiet NaN
  if (std::isinf(v)) return uint16_t(sign | 0x7C00);
  double a = std::fabs(v);
  if (a < 0x1p-14) {  // subnormal range, round on the 2^-24 grid
    double r = std::nearbyint(std::ldexp(a, 24));
    uint16_t q = uint16_t(r);  // r <= 1024
    return uint16_t(sign | q); // q == 1024 lands exactly on the first normal
  }
  int e2;
  std::frexp(a, &e2);   // a = f * 2^e2, f in [0.5, 1)
  int ue = e2 - 1;      // unbiased exponent
  if (ue > 15) return uint16_t(sign | 0x7C00);
  double r = std::nearbyint(std::ldexp(a, 10 - ue));  // in [1024, 2048]
  uint16_t q = uint16_t(r);
  if (q == 2048) {  // mantissa overflowed into the next binade
    ++ue;
    if (ue > 15) return uint16_t(sign | 0x7C00);
    q = 1024;
  }
  return uint16_t(sign | uint16_t((ue + 15) << 10) | uint16_t(q - 1024));
}

}  // namespace elves
