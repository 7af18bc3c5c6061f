#include <json.hpp>

#include "elves/io_util.hpp"
#include "elves/model.hpp"

namespace elves {

using ordered_json = nlohmann::ordered_json;

unsigned Dtype::element_width() const {
  switch (tag) {
    case DtypeTag::kF16: return 2;
    case DtypeTag::kF32: return 4;
    case DtypeTag::kF64: return 8;
    case DtypeTag::kU8: return 1;
    case DtypeTag::kI64: return 8;
    case DtypeTag::kBool: return 1;
    default: return other_width;
  }
}

FloatKind Dtype::float_kind() const {
  switch (tag) {
    case DtypeTag::kF16: return FloatKind::kF16;
    case DtypeTag::kF32: return FloatKind::kF32;
    case DtypeTag::kF64: return FloatKind::kF64;
    default: throw std::logic_error("float_kind() on non-float dtype");
  }
}

uint64_t TensorMeta::element_count() const {
  uint64_t n = 1;
  for (uint64_t d : shape) {
    if (d != 0 && n > UINT64_MAX / d) return UINT64_MAX;  // hostile shape, fails extent check
    n *= d;
  }
  return n;
}

static Dtype make_dtype(const std::string& s, uint64_t byte_len, uint64_t elem_count,
                        const std::string& ctx) {
  Dtype d;
  d.str = s;
  if (s == "F16") d.tag = DtypeTag::kF16;
  else if (s == "F32") d.tag = DtypeTag::kF32;
  else if (s == "F64") d.tag = DtypeTag::kF64;
  else if (s == "U8") d.tag = DtypeTag::kU8;
  else if (s == "I64") d.tag = DtypeTag::kI64;
  else if (s == "BOOL") d.tag = DtypeTag::kBool;
  else {
    // Unknown dtype: carried opaquely, but only if the element width can be
    // inferred from the extent.
    d.tag = DtypeTag::kOther;
    if (elem_count == 0 || byte_len % elem_count != 0)
      throw ParseError(ctx + ": cannot infer element width for dtype '" + s + "'");
    d.other_width = uint32_t(byte_len / elem_count);
    if (d.other_width == 0)
      throw ParseError(ctx + ": zero element width for dtype '" + s + "'");
  }
  return d;
}

LoadedModel load_model_from_bytes(std::span<const uint8_t> file_bytes, std::string model_id) {
  std::string ctx = "model '" + model_id + "'";
  if (file_bytes.size() < 8)
    throw ParseError(ctx + ": file shorter than the 8-byte header prefix");
  ByteReader hdr(file_bytes, ctx);
  uint64_t header_len = hdr.get_le<uint64_t>();
  if (header_len > file_bytes.size() - 8)
    throw ParseError(ctx + ": header length " + std::to_string(header_len) +
                     " exceeds file size");
  auto header_bytes = hdr.get_bytes(size_t(header_len));

  ordered_json j;
  try {
    j = ordered_json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ctx + ": header is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ParseError(ctx + ": header is not a JSON object");

  LoadedModel m;
  m.manifest.model_id = std::move(model_id);
  uint64_t payload_len = file_bytes.size() - 8 - header_len;
  m.manifest.payload_bytes = payload_len;

  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "__metadata__") continue;
    const ordered_json& tj = it.value();
    std::string tctx = ctx + " tensor '" + it.key() + "'";
    if (!tj.is_object() || !tj.contains("dtype") || !tj.contains("shape") ||
        !tj.contains("data_offsets"))
      throw ParseError(tctx + ": missing dtype/shape/data_offsets");

    TensorMeta t;
    t.name = it.key();
    if (!tj["dtype"].is_string()) throw ParseError(tctx + ": dtype is not a string");
    const ordered_json& shape = tj["shape"];
    if (!shape.is_array()) throw ParseError(tctx + ": shape is not an array");
    for (const auto& d : shape) {
      if (!d.is_number_unsigned()) throw ParseError(tctx + ": bad shape entry");
      t.shape.push_back(d.get<uint64_t>());
    }
    const ordered_json& off = tj["data_offsets"];
    if (!off.is_array() || off.size() != 2 || !off[0].is_number_unsigned() ||
        !off[1].is_number_unsigned())
      throw ParseError(tctx + ": bad data_offsets");
    uint64_t begin = off[0].get<uint64_t>(), end = off[1].get<uint64_t>();
    if (begin > end || end > payload_len)
      throw ParseError(tctx + ": data_offsets [" + std::to_string(begin) + ", " +
                       std::to_string(end) + ") outside payload of " +
                       std::to_string(payload_len) + " bytes");
    t.data_offset = begin;
    t.data_len = end - begin;
    t.dtype = make_dtype(tj["dtype"].get<std::string>(), t.data_len, t.element_count(), tctx);
    if (t.element_count() * t.dtype.element_width() != t.data_len)
      throw ParseError(tctx + ": extent of " + std::to_string(t.data_len) +
                       " bytes does not match shape and dtype width");
    m.manifest.tensors.push_back(std::move(t));
  }

  m.data.assign(file_bytes.begin() + 8 + header_len, file_bytes.end());
  return m;
}

LoadedModel load_model(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return load_model_from_bytes(bytes, path.filename().string());
}

static std::string build_header(const ModelManifest& m) {
  ordered_json j = ordered_json::object();
  uint64_t off = 0;
  for (const TensorMeta& t : m.tensors) {
    ordered_json tj;
    tj["dtype"] = t.dtype.str;
    tj["shape"] = t.shape;
    tj["data_offsets"] = {off, off + t.data_len};
    j[t.name] = std::move(tj);
    off += t.data_len;
  }
  std::string header = j.dump();
  // Pad the header so the payload starts 8-byte aligned, as common writers do.
  while ((8 + header.size()) % 8 != 0) header.push_back(' ');
  return header;
}

uint64_t serialized_model_size(const ModelManifest& m) {
  uint64_t total = 8 + build_header(m).size();
  for (const TensorMeta& t : m.tensors) total += t.data_len;
  return total;
}

std::vector<uint8_t> serialize_model(const LoadedModel& m) {
  std::string header = build_header(m.manifest);
  uint64_t off = 0;
  for (const TensorMeta& t : m.manifest.tensors) off += t.data_len;

  std::vector<uint8_t> out;
  out.reserve(8 + header.size() + off);
  put_le<uint64_t>(out, header.size());
  out.insert(out.end(), header.begin(), header.end());
  for (const TensorMeta& t : m.manifest.tensors) {
    if (t.data_offset + t.data_len > m.data.size())
      throw std::logic_error("serialize_model: extent outside payload");
    out.insert(out.end(), m.data.begin() + t.data_offset,
               m.data.begin() + t.data_offset + t.data_len);
  }
  return out;
}

void write_model(const LoadedModel& m, const std::filesystem::path& path) {
  auto bytes = serialize_model(m);
  write_file_atomic(path, bytes);
}

}  // namespace elves
