#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace elves {

// Final-stage lossless coder. Implementations must satisfy
// decompress(compress(x), x.size()) == x for every byte string x; the
// archive records the id so readers can reject archives built with a
// backend this binary does not carry.
class LosslessBackend {
 public:
  virtual ~LosslessBackend() = default;
  virtual uint32_t id() const = 0;
  virtual std::string_view name() const = 0;
  virtual std::vector<uint8_t> compress(std::span<const uint8_t> raw) const = 0;
  virtual std::vector<uint8_t> decompress(std::span<const uint8_t> comp,
                                          size_t raw_size) const = 0;
};

inline constexpr uint32_t kBackendStore = 0;
inline constexpr uint32_t kBackendDeflate = 1;

const LosslessBackend* find_backend(uint32_t id);               // nullptr if unknown
const LosslessBackend* find_backend_by_name(std::string_view);  // nullptr if unknown
const LosslessBackend& default_backend();                       // deflate
std::vector<const LosslessBackend*> all_backends();

}  // namespace elves
