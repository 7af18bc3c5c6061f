#include <doctest.h>

#include <random>

#include "elves/bitstream.hpp"

using namespace elves;

TEST_CASE("single field lands MSB-first") {
  BitWriter w;
  w.write_bits(0b10100, 5);
  CHECK(w.bit_count() == 5);
  REQUIRE(w.bytes().size() == 1);
  // 10100 in the top five bits, zero padding below.
  CHECK(w.bytes()[0] == 0xA0);
}

TEST_CASE("fields spanning byte boundaries") {
  BitWriter w;
  w.write_bits(1, 1);
  w.write_bits(0b10100, 5);
  w.write_bits(1'000'000, 20);
  CHECK(w.bit_count() == 26);
  CHECK(w.bytes().size() == 4);

  BitReader r(w.bytes(), w.bit_count());
  CHECK(r.read_bits(1) == 1);
  CHECK(r.read_bits(5) == 0b10100);
  CHECK(r.read_bits(20) == 1'000'000);
  CHECK(r.remaining_bits() == 0);
}

TEST_CASE("24-bit fields pack to ceil(24n/8) bytes") {
  for (size_t n : {0, 1, 2, 3, 5, 1000}) {
    BitWriter w;
    for (size_t i = 0; i < n; ++i) w.write_bits(0xABCDEF & 0xFFFFFF, 24);
    CHECK(w.bytes().size() == (24 * n + 7) / 8);
  }
}

TEST_CASE("width 64 round-trips extreme values") {
  BitWriter w;
  w.write_bits(UINT64_MAX, 64);
  w.write_bits(0, 64);
  w.write_bits(1, 64);
  BitReader r(w.bytes(), w.bit_count());
  CHECK(r.read_bits(64) == UINT64_MAX);
  CHECK(r.read_bits(64) == 0);
  CHECK(r.read_bits(64) == 1);
}

TEST_CASE("random sequences round-trip") {
  std::mt19937_64 eng(7);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<std::pair<uint64_t, unsigned>> fields;
    BitWriter w;
    size_t count = eng() % 300;
    for (size_t i = 0; i < count; ++i) {
      unsigned width = 1 + unsigned(eng() % 64);
      uint64_t value = eng();
      if (width < 64) value &= (uint64_t(1) << width) - 1;
      fields.emplace_back(value, width);
      w.write_bits(value, width);
    }
    BitReader r(w.bytes(), w.bit_count());
    for (auto [value, width] : fields) CHECK(r.read_bits(width) == value);
    CHECK(r.remaining_bits() == 0);
  }
}

TEST_CASE("final byte padding is zero") {
  std::mt19937_64 eng(9);
  for (int iter = 0; iter < 50; ++iter) {
    BitWriter w;
    for (int i = 0; i < int(eng() % 40) + 1; ++i) w.write_bits(eng() & 1, 1);
    unsigned pad = unsigned(8 - w.bit_count() % 8) % 8;
    if (pad) CHECK((w.bytes().back() & ((1u << pad) - 1)) == 0);
  }
}

TEST_CASE("underrun throws and leaves the cursor alone") {
  BitWriter w;
  w.write_bits(0x7, 3);
  BitReader r(w.bytes(), w.bit_count());
  CHECK(r.read_bits(2) == 0x3);
  CHECK_THROWS_AS(r.read_bits(2), EndOfStream);
  CHECK(r.position_bits() == 2);
  CHECK(r.read_bits(1) == 1);
  CHECK_THROWS_AS(r.read_bits(1), EndOfStream);
}

TEST_CASE("zero and over-wide widths are rejected") {
  BitWriter w;
  CHECK_THROWS_AS(w.write_bits(0, 0), std::invalid_argument);
  CHECK_THROWS_AS(w.write_bits(0, 65), std::invalid_argument);
  CHECK_THROWS_AS(w.write_bits(4, 2), std::invalid_argument);  // value too wide
  w.write_bits(1, 1);
  BitReader r(w.bytes(), w.bit_count());
  CHECK_THROWS_AS(r.read_bits(0), std::invalid_argument);
  CHECK_THROWS_AS(r.read_bits(65), std::invalid_argument);
}

TEST_CASE("logical length may exclude padding but not exceed the buffer") {
  std::vector<uint8_t> one_byte{0xFF};
  CHECK_NOTHROW(BitReader(one_byte, 3));
  CHECK_THROWS_AS(BitReader(one_byte, 9), CorruptionError);
}
