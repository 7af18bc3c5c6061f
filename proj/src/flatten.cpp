#include <cstring>

#include "elves/model.hpp"

namespace elves {

std::vector<FloatStream> flatten_float_layers(const LoadedModel& m,
                                              const std::vector<bool>* include) {
  // One stream per float dtype, ordered F16, F32, F64; empty streams dropped.
  FloatStream streams[3];
  for (int k = 0; k < 3; ++k) streams[k].kind = FloatKind(k);

  for (uint32_t i = 0; i < m.manifest.tensors.size(); ++i) {
    const TensorMeta& t = m.manifest.tensors[i];
    if (!t.dtype.is_float()) continue;
    if (include && !(*include)[i]) continue;
    FloatStream& s = streams[int(t.dtype.float_kind())];
    uint64_t params = t.element_count();
    s.extents.push_back({i, s.param_count, params});
    auto bytes = m.layer_bytes(i);
    s.data.insert(s.data.end(), bytes.begin(), bytes.end());
    s.param_count += params;
  }

  std::vector<FloatStream> out;
  for (auto& s : streams)
    if (s.param_count > 0) out.push_back(std::move(s));
  return out;
}

void scatter_float_stream(const FloatStream& s, const ModelManifest& manifest,
                          std::span<uint8_t> payload) {
  unsigned w = float_kind_width(s.kind);
  if (s.data.size() != s.param_count * w)
    throw CorruptionError("float stream: payload does not match parameter count");
  for (const FloatExtent& e : s.extents) {
    const TensorMeta& t = manifest.tensors.at(e.tensor_index);
    uint64_t byte_len = e.param_count * w;
    if (t.data_len != byte_len)
      throw CorruptionError("float stream: extent does not match tensor '" + t.name + "'");
    if (t.data_offset + byte_len > payload.size() ||
        (e.stream_offset + e.param_count) * w > s.data.size())
      throw CorruptionError("float stream: extent outside payload");
    std::memcpy(payload.data() + t.data_offset, s.data.data() + e.stream_offset * w,
                size_t(byte_len));
  }
}

}  // namespace elves
