#include "elves/io_util.hpp"

#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstdio>
#include <system_error>

namespace elves {

void put_leb128(std::vector<uint8_t>& out, uint64_t v) {
  while (v >= 0x80) {
    out.push_back(uint8_t(v) | 0x80);
    v >>= 7;
  }
  out.push_back(uint8_t(v));
}

uint64_t ByteReader::get_leb128() {
  uint64_t v = 0;
  for (unsigned shift = 0; shift < 64; shift += 7) {
    need(1);
    uint8_t b = data_[pos_++];
    v |= uint64_t(b & 0x7F) << shift;
    if (!(b & 0x80)) {
      if (shift == 63 && (b & 0x7E))
        throw CorruptionError(what_ + ": varint overflows 64 bits");
      return v;
    }
  }
  throw CorruptionError(what_ + ": varint longer than 10 bytes");
}

// Reflected Castagnoli polynomial; note this is not the zlib/PNG CRC-32.
static std::array<uint32_t, 256> make_crc32c_table() {
  std::array<uint32_t, 256> t{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0x82F63B78u ^ (c >> 1) : c >> 1;
    t[i] = c;
  }
  return t;
}

uint32_t crc32c(std::span<const uint8_t> data, uint32_t seed) {
  static const std::array<uint32_t, 256> table = make_crc32c_table();
  uint32_t c = ~seed;
  for (uint8_t b : data) c = table[(c ^ b) & 0xFF] ^ (c >> 8);
  return ~c;
}

std::vector<uint8_t> read_file(const std::filesystem::path& p) {
  std::FILE* f = std::fopen(p.c_str(), "rb");
  if (!f) throw IoError("cannot open " + p.string() + ": " + std::strerror(errno));
  std::vector<uint8_t> data;
  std::fseek(f, 0, SEEK_END);
  long sz = std::ftell(f);
  if (sz < 0) {
    std::fclose(f);
    throw IoError("cannot stat " + p.string());
  }
  std::fseek(f, 0, SEEK_SET);
  data.resize(size_t(sz));
  size_t got = sz ? std::fread(data.data(), 1, data.size(), f) : 0;
  std::fclose(f);
  if (got != data.size()) throw IoError("short read on " + p.string());
  return data;
}

void write_file(const std::filesystem::path& p, std::span<const uint8_t> data) {
  std::FILE* f = std::fopen(p.c_str(), "wb");
  if (!f) throw IoError("cannot create " + p.string() + ": " + std::strerror(errno));
  size_t put = data.empty() ? 0 : std::fwrite(data.data(), 1, data.size(), f);
  int rc = std::fclose(f);
  if (put != data.size() || rc != 0) {
    std::filesystem::remove(p);
    throw IoError("short write on " + p.string());
  }
}

void write_file_atomic(const std::filesystem::path& p, std::span<const uint8_t> data) {
  std::filesystem::path tmp = p;
  tmp += ".tmp." + std::to_string(::getpid());
  write_file(tmp, data);
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " -> " + p.string() + ": " + ec.message());
  }
}

}  // namespace elves
