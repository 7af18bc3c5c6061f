#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "elves/chunk.hpp"

using namespace elves;

namespace {

std::vector<uint8_t> random_bytes(size_t n, uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::vector<uint8_t> v(n);
  for (auto& b : v) b = uint8_t(eng());
  return v;
}

void check_partition(const std::vector<ChunkRecord>& chunks, std::span<const uint8_t> data) {
  uint64_t pos = 0;
  for (const ChunkRecord& c : chunks) {
    CHECK(c.offset == pos);
    CHECK(c.length > 0);
    CHECK(c.digest == sha256(data.subspan(size_t(c.offset), size_t(c.length))));
    pos += c.length;
  }
  CHECK(pos == data.size());
}

}  // namespace

TEST_CASE("fixed-size chunking") {
  auto data = random_bytes(10, 1);
  auto chunks = fsc_chunks(data, 4);
  REQUIRE(chunks.size() == 3);
  CHECK(chunks[0].length == 4);
  CHECK(chunks[1].offset == 4);
  CHECK(chunks[2].length == 2);  // short tail
  check_partition(chunks, data);

  CHECK(fsc_chunks({}, 4).empty());
  CHECK(fsc_chunks(data, 100).size() == 1);
  CHECK_THROWS_AS(fsc_chunks(data, 0), std::invalid_argument);
}

TEST_CASE("content-defined chunking partitions the input within bounds") {
  auto data = random_bytes(1 << 20, 2);
  CdcConfig cfg;  // 128 / 4096 / 128K defaults
  auto chunks = cdc_chunks(data, cfg);
  check_partition(chunks, data);
  for (size_t i = 0; i < chunks.size(); ++i) {
    CAPTURE(i);
    CHECK(chunks[i].length <= cfg.max_size);
    if (i + 1 < chunks.size()) CHECK(chunks[i].length > cfg.min_size);
  }
  // Random data should cut near the average target: ~256 chunks for 1 MiB.
  CHECK(chunks.size() >= 64);
  CHECK(chunks.size() <= 1024);
}

TEST_CASE("chunking twice gives identical boundaries") {
  auto data = random_bytes(300000, 3);
  auto a = cdc_chunks(data);
  auto b = cdc_chunks(data);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].offset == b[i].offset);
    CHECK(a[i].length == b[i].length);
    CHECK(a[i].digest == b[i].digest);
  }
}

TEST_CASE("the first boundary matches the first chunk") {
  auto data = random_bytes(100000, 4);
  auto chunks = cdc_chunks(data);
  CHECK(cdc_next_boundary(data) == chunks[0].length);
  // And recursively for the rest of the stream.
  CHECK(cdc_next_boundary(std::span<const uint8_t>(data).subspan(size_t(chunks[0].length))) ==
        chunks[1].length);
}

TEST_CASE("boundaries re-synchronize after a same-length prefix edit") {
  // Two streams share a long suffix; once both find a common cut inside it,
  // every later boundary must coincide.
  const size_t prefix_len = 7000;
  auto shared = random_bytes(1 << 20, 5);
  auto pa = random_bytes(prefix_len, 6);
  auto pb = random_bytes(prefix_len, 7);
  std::vector<uint8_t> sa(pa), sb(pb);
  sa.insert(sa.end(), shared.begin(), shared.end());
  sb.insert(sb.end(), shared.begin(), shared.end());

  auto cuts = [](const std::vector<ChunkRecord>& chunks) {
    std::set<uint64_t> s;
    for (const ChunkRecord& c : chunks) s.insert(c.offset + c.length);
    return s;
  };
  auto ca = cuts(cdc_chunks(sa));
  auto cb = cuts(cdc_chunks(sb));
  // First cut position inside the shared region that both streams agree on.
  uint64_t sync = 0;
  bool found = false;
  for (auto it = ca.lower_bound(prefix_len); it != ca.end(); ++it)
    if (cb.count(*it)) {
      sync = *it;
      found = true;
      break;
    }
  REQUIRE(found);
  CHECK(sync < prefix_len + 3 * CdcConfig{}.max_size);
  auto tail = [&](const std::set<uint64_t>& s) {
    return std::vector<uint64_t>(s.upper_bound(sync), s.end());
  };
  CHECK(tail(ca) == tail(cb));
}

TEST_CASE("short inputs are a single chunk") {
  auto tiny = random_bytes(100, 8);  // below min_size
  auto chunks = cdc_chunks(tiny);
  REQUIRE(chunks.size() == 1);
  CHECK(chunks[0].length == tiny.size());
  CHECK(cdc_chunks({}).empty());
  CHECK(cdc_next_boundary({}) == 0);
}

TEST_CASE("custom configurations hold their bounds") {
  auto data = random_bytes(200000, 9);
  CdcConfig cfg{16, 64, 160};
  auto chunks = cdc_chunks(data, cfg);
  check_partition(chunks, data);
  for (size_t i = 0; i + 1 < chunks.size(); ++i) {
    CHECK(chunks[i].length > 16);
    CHECK(chunks[i].length <= 160);
  }
}

TEST_CASE("configuration validation") {
  auto data = random_bytes(100, 10);
  CHECK_THROWS_AS(cdc_chunks(data, CdcConfig{0, 64, 128}), std::invalid_argument);
  CHECK_THROWS_AS(cdc_chunks(data, CdcConfig{64, 64, 128}), std::invalid_argument);
  CHECK_THROWS_AS(cdc_chunks(data, CdcConfig{16, 256, 128}), std::invalid_argument);
  CHECK_THROWS_AS(cdc_chunks(data, CdcConfig{16, 100, 128}), std::invalid_argument);  // not 2^k
}

TEST_CASE("similarity signature samples every stride-th element") {
  // 100 4-byte elements: the signature hashes elements 0, 32, 64, 96.
  auto data = random_bytes(400, 11);
  Sha256 ref;
  for (size_t e : {0u, 32u, 64u, 96u}) ref.update(std::span<const uint8_t>(data).subspan(e * 4, 4));
  CHECK(similarity_signature(data, 4, 32) == ref.finish());

  SUBCASE("non-sampled changes are invisible, sampled changes are not") {
    auto tweaked = data;
    tweaked[5 * 4] ^= 0xFF;  // element 5 is never sampled
    CHECK(similarity_signature(tweaked, 4, 32) == similarity_signature(data, 4, 32));
    auto hit = data;
    hit[32 * 4] ^= 0xFF;  // element 32 is sampled
    CHECK(similarity_signature(hit, 4, 32) != similarity_signature(data, 4, 32));
    auto first = data;
    first[0] ^= 0xFF;  // element 0 is always sampled
    CHECK(similarity_signature(first, 4, 32) != similarity_signature(data, 4, 32));
  }

  SUBCASE("byte-width sampling") {
    Sha256 bytes_ref;
    for (size_t i = 0; i < data.size(); i += 32)
      bytes_ref.update(std::span<const uint8_t>(data).subspan(i, 1));
    CHECK(similarity_signature(data, 1, 32) == bytes_ref.finish());
  }

  SUBCASE("stride one hashes everything") {
    CHECK(similarity_signature(data, 4, 1) == sha256(data));
  }

  SUBCASE("argument validation") {
    CHECK_THROWS_AS(similarity_signature(data, 0, 32), std::invalid_argument);
    CHECK_THROWS_AS(similarity_signature(data, 4, 0), std::invalid_argument);
    auto odd = data;
    odd.push_back(0);  // 401 bytes is not a whole number of 4-byte elements
    CHECK_THROWS_AS(similarity_signature(odd, 4, 32), std::invalid_argument);
  }
}
