#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

namespace elves {

using Digest256 = std::array<uint8_t, 32>;

class Sha256 {
 public:
  Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  ~Sha256();

  void update(std::span<const uint8_t> data);
  Digest256 finish();

 private:
  void* ctx_;
};

Digest256 sha256(std::span<const uint8_t> data);
std::string hex_digest(const Digest256& d);

}  // namespace elves
