#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elves/elf.hpp"
#include "elves/errors.hpp"

namespace elves {

enum class DtypeTag : uint8_t { kF16 = 0, kF32 = 1, kF64 = 2, kU8 = 3, kI64 = 4, kBool = 5, kOther = 6 };

struct Dtype {
  DtypeTag tag = DtypeTag::kF32;
  std::string str;          // dtype string as it appears in the file
  uint32_t other_width = 0; // bytes per element when tag == kOther

  unsigned element_width() const;
  bool is_float() const {
    return tag == DtypeTag::kF16 || tag == DtypeTag::kF32 || tag == DtypeTag::kF64;
  }
  FloatKind float_kind() const;
  bool operator==(const Dtype& o) const { return tag == o.tag && str == o.str && other_width == o.other_width; }
};

struct TensorMeta {
  std::string name;
  Dtype dtype;
  std::vector<uint64_t> shape;
  uint64_t data_offset = 0;  // into the payload section, past the header
  uint64_t data_len = 0;

  uint64_t element_count() const;
};

struct ModelManifest {
  std::string model_id;
  std::vector<TensorMeta> tensors;  // document order of the header
  uint64_t payload_bytes = 0;
};

struct LoadedModel {
  ModelManifest manifest;
  std::vector<uint8_t> data;  // payload section

  std::span<const uint8_t> layer_bytes(size_t tensor_index) const {
    const TensorMeta& t = manifest.tensors.at(tensor_index);
    return {data.data() + t.data_offset, size_t(t.data_len)};
  }
};

// safetensors container: u64 little-endian header length, that many bytes of
// JSON mapping tensor name -> {dtype, shape, data_offsets}, then raw payload.
LoadedModel load_model(const std::filesystem::path& path);
LoadedModel load_model_from_bytes(std::span<const uint8_t> file_bytes, std::string model_id);

// Emits tensors in manifest order with contiguous offsets; payload bytes are
// taken through the old offsets, so a reordered manifest reorders the file.
std::vector<uint8_t> serialize_model(const LoadedModel& m);
void write_model(const LoadedModel& m, const std::filesystem::path& path);
// Size serialize_model would produce, without building the bytes.
uint64_t serialized_model_size(const ModelManifest& m);

// ---- per-dtype flattening ----------------------------------------------

struct FloatExtent {
  uint32_t tensor_index = 0;
  uint64_t stream_offset = 0;  // in parameters
  uint64_t param_count = 0;
};

struct FloatStream {
  FloatKind kind = FloatKind::kF32;
  uint64_t param_count = 0;
  std::vector<uint8_t> data;  // raw little-endian elements
  std::vector<FloatExtent> extents;
};

// Concatenates the selected float tensors per dtype, in manifest order.
// Tensors whose index is absent from `include` (when given) are skipped.
std::vector<FloatStream> flatten_float_layers(const LoadedModel& m,
                                              const std::vector<bool>* include = nullptr);

// Inverse: copies stream elements back into the extents' tensors.
void scatter_float_stream(const FloatStream& s, const ModelManifest& manifest,
                          std::span<uint8_t> payload);

}  // namespace elves
