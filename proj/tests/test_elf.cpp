#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "elves/elf.hpp"
#include "elves/errors.hpp"
#include "elves/fp.hpp"

using namespace elves;

TEST_CASE("per-kind code widths and error bounds") {
  CHECK(float_kind_code_bits(FloatKind::kF16) == 11);
  CHECK(float_kind_code_bits(FloatKind::kF32) == 24);
  CHECK(float_kind_code_bits(FloatKind::kF64) == 53);
  CHECK(float_kind_width(FloatKind::kF16) == 2);
  CHECK(float_kind_width(FloatKind::kF32) == 4);
  CHECK(float_kind_width(FloatKind::kF64) == 8);
  CHECK(float_kind_error_bound(FloatKind::kF16) == 0x1p-11);
  CHECK(float_kind_error_bound(FloatKind::kF32) == 0x1p-24);
  CHECK(float_kind_error_bound(FloatKind::kF64) == 0x1p-53);
}

TEST_CASE("transform keeps the sign and the mantissa of 1 + |p|") {
  // 0.1415926069 -> 1 + p = 1.1415926069..., which rounds to the float
  // 1.1415926218...; the restored value carries exactly that fraction.
  float p = 0.1415926069f;
  auto code = ElfCodec<F32Layout>::transform(f32_bits(p));
  REQUIRE(code.has_value());
  CHECK((*code >> 23) == 0);  // sign bit
  CHECK((*code & 0x7FFFFF) == (f32_bits(1.0f + p) & 0x7FFFFF));
  float restored = f32_from_bits(ElfCodec<F32Layout>::restore(*code));
  CHECK(std::fabs(double(restored) - 0.1415926218) < 1e-9);
  CHECK(std::fabs(double(restored) - double(p)) <= 0x1p-24);

  auto neg = ElfCodec<F32Layout>::transform(f32_bits(-p));
  REQUIRE(neg.has_value());
  CHECK((*neg >> 23) == 1);
  CHECK((*neg & 0x7FFFFF) == (*code & 0x7FFFFF));
  CHECK(f32_from_bits(ElfCodec<F32Layout>::restore(*neg)) == -restored);

  // 0.5 -> 1.5, whose mantissa is the single leading fraction bit.
  auto half = ElfCodec<F32Layout>::transform(f32_bits(0.5f));
  REQUIRE(half.has_value());
  CHECK(*half == 0x400000);
}

TEST_CASE("values whose 1 + |p| rounds up to 2.0 are exceptions") {
  // Largest float below 1: 1 + it lands halfway to 2.0 and ties to even.
  CHECK_FALSE(ElfCodec<F32Layout>::transform(0x3F7FFFFFu).has_value());
  CHECK_FALSE(ElfCodec<F32Layout>::transform(0xBF7FFFFFu).has_value());
  CHECK(ElfCodec<F32Layout>::transform(0x3F7FFFFEu).has_value());  // 1 - 2^-23

  CHECK_FALSE(ElfCodec<F16Layout>::transform(uint16_t(0x3BFF)).has_value());
  CHECK(ElfCodec<F16Layout>::transform(uint16_t(0x3BFE)).has_value());

  CHECK_FALSE(ElfCodec<F64Layout>::transform(f64_bits(1.0 - 0x1p-53)).has_value());
  CHECK(ElfCodec<F64Layout>::transform(f64_bits(1.0 - 0x1p-52)).has_value());
}

TEST_CASE("non-finite and unit-or-larger values are exceptions") {
  for (uint32_t bits : {0x7FC00000u,   // quiet NaN
                        0x7F800001u,   // signalling NaN
                        0x7F800000u,   // +inf
                        0xFF800000u,   // -inf
                        0x3F800000u,   // 1.0
                        0xBF800000u,   // -1.0
                        f32_bits(2.5f), f32_bits(-1234.0f)})
    CHECK_FALSE(ElfCodec<F32Layout>::transform(bits).has_value());
  for (uint16_t bits : {uint16_t(0x7E00), uint16_t(0x7C00), uint16_t(0xFC00),
                        uint16_t(0x3C00), uint16_t(0x7BFF)})
    CHECK_FALSE(ElfCodec<F16Layout>::transform(bits).has_value());
  CHECK_FALSE(ElfCodec<F64Layout>::transform(f64_bits(1.0)).has_value());
  CHECK_FALSE(ElfCodec<F64Layout>::transform(0x7FF0000000000000ull).has_value());
}

TEST_CASE("signed zeros survive the round trip bit-exactly") {
  auto pz = ElfCodec<F32Layout>::transform(0x00000000u);
  auto nz = ElfCodec<F32Layout>::transform(0x80000000u);
  REQUIRE(pz.has_value());
  REQUIRE(nz.has_value());
  CHECK(ElfCodec<F32Layout>::restore(*pz) == 0x00000000u);
  CHECK(ElfCodec<F32Layout>::restore(*nz) == 0x80000000u);
  auto hz = ElfCodec<F16Layout>::transform(uint16_t(0x8000));
  REQUIRE(hz.has_value());
  CHECK(ElfCodec<F16Layout>::restore(*hz) == 0x8000);
}

TEST_CASE("restore then transform returns the same code") {
  // Restored values are already on the quantization grid, so a second
  // encoding must be a no-op. Exhaustive for half precision.
  for (uint32_t code = 0; code < (1u << 11); ++code) {
    uint16_t r = ElfCodec<F16Layout>::restore(uint16_t(code));
    auto again = ElfCodec<F16Layout>::transform(r);
    REQUIRE(again.has_value());
    CHECK(*again == code);
  }
  std::mt19937_64 eng(21);
  for (int i = 0; i < 200000; ++i) {
    uint32_t code = uint32_t(eng()) & 0xFFFFFF;
    code |= uint32_t(eng() & 1) << 23;  // random sign
    uint32_t r = ElfCodec<F32Layout>::restore(code);
    auto again = ElfCodec<F32Layout>::transform(r);
    REQUIRE(again.has_value());
    CHECK(*again == code);
  }
  for (int i = 0; i < 50000; ++i) {
    uint64_t code = eng() & ((1ull << 53) - 1);
    uint64_t r = ElfCodec<F64Layout>::restore(code);
    auto again = ElfCodec<F64Layout>::transform(r);
    REQUIRE(again.has_value());
    CHECK(*again == code);
  }
}

TEST_CASE("single-precision add matches a double-path reference") {
  // 1 + |p| computed exactly in double then rounded once to float equals the
  // native float add for every |p| < 1, so the two must agree bit for bit.
  std::mt19937_64 eng(22);
  for (int i = 0; i < 200000; ++i) {
    uint32_t bits = uint32_t(eng());
    auto got = ElfCodec<F32Layout>::transform(bits);
    float p = f32_from_bits(bits);
    if (!(std::fabs(p) < 1.0f)) {
      CHECK_FALSE(got.has_value());
      continue;
    }
    uint32_t ref = f32_bits(float(1.0 + std::fabs(double(p))));
    if ((ref >> 23) != 127) {
      CHECK_FALSE(got.has_value());  // rounded up to 2.0
    } else {
      REQUIRE(got.has_value());
      uint32_t expect = ((bits >> 31) << 23) | (ref & 0x7FFFFF);
      CHECK(*got == expect);
    }
  }
}

namespace {

template <class T>
std::vector<uint8_t> as_bytes(const std::vector<T>& v) {
  std::vector<uint8_t> b(v.size() * sizeof(T));
  std::memcpy(b.data(), v.data(), b.size());
  return b;
}

double rand_in_unit(std::mt19937_64& eng) {
  // Log-uniform magnitude so every exponent range gets exercised.
  int e = int(eng() % 40) + 1;
  double mag = std::ldexp(double(eng() >> 11) / 9007199254740992.0 + 0.5, -e);
  return (eng() & 1) ? -mag : mag;
}

}  // namespace

TEST_CASE("round-trip error stays within half an ulp of [1, 2)") {
  std::mt19937_64 eng(23);

  SUBCASE("binary32") {
    std::vector<float> vals(20000);
    for (auto& v : vals) v = float(rand_in_unit(eng));
    ElfBlock b = elf_compress_block(std::span<const float>(vals));
    auto out = elf_decompress_block(b);
    REQUIRE(out.size() == vals.size() * 4);
    for (size_t i = 0; i < vals.size(); ++i) {
      float d;
      std::memcpy(&d, out.data() + i * 4, 4);
      CHECK(std::fabs(double(d) - double(vals[i])) <= 0x1p-24);
      CHECK(std::signbit(d) == std::signbit(vals[i]));
    }
    // Second pass over the decoded values is bit-lossless.
    ElfBlock b2 = elf_compress_block_bytes(out, FloatKind::kF32);
    CHECK(elf_decompress_block(b2) == out);
  }

  SUBCASE("binary16") {
    std::vector<uint16_t> vals(8000);
    for (auto& v : vals) v = double_to_f16_bits(rand_in_unit(eng));
    ElfBlock b = elf_compress_block(std::span<const uint16_t>(vals));
    auto out = elf_decompress_block(b);
    for (size_t i = 0; i < vals.size(); ++i) {
      uint16_t d;
      std::memcpy(&d, out.data() + i * 2, 2);
      CHECK(std::fabs(f16_bits_to_double(d) - f16_bits_to_double(vals[i])) <= 0x1p-11);
    }
  }

  SUBCASE("binary64") {
    std::vector<double> vals(20000);
    for (auto& v : vals) v = rand_in_unit(eng);
    ElfBlock b = elf_compress_block(std::span<const double>(vals));
    auto out = elf_decompress_block(b);
    for (size_t i = 0; i < vals.size(); ++i) {
      double d;
      std::memcpy(&d, out.data() + i * 8, 8);
      CHECK(std::fabs(d - vals[i]) <= 0x1p-53);
    }
  }
}

TEST_CASE("block compression separates exceptions from packed codes") {
  std::vector<float> vals = {0.25f, 2.0f, -0.75f, std::nanf(""), 0.001f,
                             HUGE_VALF, -0x1.fffffep-1f /* -(1 - 2^-24), exception */};
  ElfBlock b = elf_compress_block(std::span<const float>(vals));
  CHECK(b.kind == FloatKind::kF32);
  CHECK(b.param_count == 7);
  REQUIRE(b.exceptions.size() == 4);
  CHECK(b.exceptions[0].index == 1);
  CHECK(b.exceptions[1].index == 3);
  CHECK(b.exceptions[2].index == 5);
  CHECK(b.exceptions[3].index == 6);
  CHECK(b.exceptions[3].raw_bits == 0xBF7FFFFFull);
  CHECK(b.code_bits == 3 * 24);
  CHECK(b.code_bytes.size() == 9);

  auto out = elf_decompress_block(b);
  REQUIRE(out.size() == vals.size() * 4);
  for (size_t i : {1u, 3u, 5u, 6u}) {  // exceptions come back bit-exact
    uint32_t orig, got;
    std::memcpy(&orig, &vals[i], 4);
    std::memcpy(&got, out.data() + i * 4, 4);
    CHECK(orig == got);
  }
  float in_range;
  std::memcpy(&in_range, out.data() + 0, 4);
  CHECK(in_range == 0.25f);  // short mantissa, exactly representable after +1
}

TEST_CASE("empty and all-exception blocks") {
  ElfBlock empty = elf_compress_block(std::span<const float>{});
  CHECK(empty.param_count == 0);
  CHECK(empty.code_bits == 0);
  CHECK(elf_decompress_block(empty).empty());
  auto wire = serialize_elf_block(empty);
  ElfBlock back = parse_elf_block(wire, FloatKind::kF32);
  CHECK(back.param_count == 0);

  std::vector<float> big = {1.0f, 5.0f, -3.5f};
  ElfBlock all_exc = elf_compress_block(std::span<const float>(big));
  CHECK(all_exc.exceptions.size() == 3);
  CHECK(all_exc.code_bits == 0);
  CHECK(elf_decompress_block(all_exc) == as_bytes(big));
}

TEST_CASE("wire form round trips for every kind") {
  std::mt19937_64 eng(31);
  auto make_mixed_f32 = [&](size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) {
      switch (eng() % 8) {
        case 0: x = 1.5f; break;                       // exception
        case 1: x = std::nanf(""); break;              // exception
        default: x = float(rand_in_unit(eng)); break;  // in range
      }
    }
    return v;
  };
  for (size_t n : {1u, 7u, 64u, 1000u}) {
    auto vals = make_mixed_f32(n);
    ElfBlock b = elf_compress_block(std::span<const float>(vals));
    auto wire = serialize_elf_block(b);
    ElfBlock back = parse_elf_block(wire, FloatKind::kF32);
    CHECK(back.param_count == b.param_count);
    CHECK(back.code_bits == b.code_bits);
    CHECK(back.code_bytes == b.code_bytes);
    REQUIRE(back.exceptions.size() == b.exceptions.size());
    for (size_t i = 0; i < b.exceptions.size(); ++i) {
      CHECK(back.exceptions[i].index == b.exceptions[i].index);
      CHECK(back.exceptions[i].raw_bits == b.exceptions[i].raw_bits);
    }
    CHECK(elf_decompress_block(back) == elf_decompress_block(b));
  }

  std::vector<uint16_t> halves(300);
  for (auto& h : halves) h = uint16_t(eng());
  ElfBlock hb = elf_compress_block(std::span<const uint16_t>(halves));
  ElfBlock hback = parse_elf_block(serialize_elf_block(hb), FloatKind::kF16);
  CHECK(elf_decompress_block(hback) == elf_decompress_block(hb));

  std::vector<double> doubles(300);
  for (auto& d : doubles) d = (eng() % 4) ? rand_in_unit(eng) : 7.0;
  ElfBlock db = elf_compress_block(std::span<const double>(doubles));
  ElfBlock dback = parse_elf_block(serialize_elf_block(db), FloatKind::kF64);
  CHECK(elf_decompress_block(dback) == elf_decompress_block(db));
}

TEST_CASE("corrupt wire forms are rejected") {
  std::vector<float> vals = {0.25f, 7.0f, -0.125f, std::nanf(""), 0.5f};
  ElfBlock b = elf_compress_block(std::span<const float>(vals));
  auto wire = serialize_elf_block(b);

  SUBCASE("every strict prefix fails") {
    for (size_t len = 0; len < wire.size(); ++len) {
      std::vector<uint8_t> prefix(wire.begin(), wire.begin() + len);
      CHECK_THROWS_AS(parse_elf_block(prefix, FloatKind::kF32), CorruptionError);
    }
  }
  SUBCASE("trailing byte fails") {
    auto w = wire;
    w.push_back(0);
    CHECK_THROWS_AS(parse_elf_block(w, FloatKind::kF32), CorruptionError);
  }
  SUBCASE("more exceptions than parameters") {
    auto w = wire;
    w[4] = 0xFF;  // exception count low byte
    CHECK_THROWS_AS(parse_elf_block(w, FloatKind::kF32), CorruptionError);
  }
  SUBCASE("code bit length mismatch") {
    auto w = wire;
    w[8] ^= 1;  // code_bits low byte
    CHECK_THROWS_AS(parse_elf_block(w, FloatKind::kF32), CorruptionError);
  }
  SUBCASE("repeated exception position") {
    // Rebuild with a zero second delta: positions 1,1.
    ElfBlock bad = b;
    REQUIRE(bad.exceptions.size() == 2);
    bad.exceptions[1].index = bad.exceptions[0].index;
    auto w = serialize_elf_block(bad);
    CHECK_THROWS_AS(parse_elf_block(w, FloatKind::kF32), CorruptionError);
  }
  SUBCASE("exception position beyond the block") {
    ElfBlock bad = b;
    bad.exceptions.back().index = b.param_count + 3;
    auto w = serialize_elf_block(bad);
    CHECK_THROWS_AS(parse_elf_block(w, FloatKind::kF32), CorruptionError);
  }
  SUBCASE("nonzero padding bits") {
    // Single-precision codes fill bytes exactly, so use a half block whose
    // 11 code bits leave 5 padding bits in the last byte.
    std::vector<uint16_t> half{0x3800};
    ElfBlock h = elf_compress_block(std::span<const uint16_t>(half));
    auto wh = serialize_elf_block(h);
    wh.back() |= 0x01;
    CHECK_THROWS_AS(parse_elf_block(wh, FloatKind::kF16), CorruptionError);
  }
  SUBCASE("byte count not a multiple of the width") {
    std::vector<uint8_t> raw(10, 0);
    CHECK_THROWS_AS(elf_compress_block_bytes(raw, FloatKind::kF32), std::invalid_argument);
  }
}
