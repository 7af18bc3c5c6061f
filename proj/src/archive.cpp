#include "elves/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <map>
#include <set>

#include "elves/de.hpp"
#include "elves/dedup.hpp"
#include "elves/elf.hpp"
#include "elves/io_util.hpp"
#include "elves/thread.hpp"

namespace elves {

namespace {

constexpr uint32_t kVersion = 1;
constexpr uint8_t kMagic[4] = {'E', 'L', 'V', 'S'};
constexpr uint32_t kFrameSize = 4u << 20;
constexpr uint8_t kTagIndex[4] = {'I', 'D', 'X', '0'};
constexpr uint8_t kTagRaw[4] = {'R', 'A', 'W', '0'};
constexpr uint8_t kTagStage2[4] = {'S', 'T', '2', '0'};

}  // namespace

const char* method_tag_name(MethodTag t) {
  switch (t) {
    case MethodTag::kDedupRef: return "DEDUP_REF";
    case MethodTag::kRaw: return "RAW";
    case MethodTag::kElf: return "ELF";
    default: return "DE";
  }
}

void validate_options(const CompressOptions& opt) {
  if (opt.elf_block_params < (uint64_t(1) << 16) || !std::has_single_bit(opt.elf_block_params))
    throw std::invalid_argument(
        "block size must be a power of two and at least 65536 parameters");
  if (opt.stage_final && !find_backend(opt.backend_id))
    throw UnsupportedBackendError("unknown final-stage backend id " +
                                  std::to_string(opt.backend_id));
}

MethodTag select_stage2(uint64_t de_bytes, uint64_t elf_bytes, uint64_t raw_bytes) {
  uint64_t best = std::min(de_bytes, elf_bytes);
  if (best == UINT64_MAX || best > raw_bytes) return MethodTag::kRaw;
  return elf_bytes <= de_bytes ? MethodTag::kElf : MethodTag::kDe;
}

ModelSource file_source(const std::filesystem::path& path) {
  return {path.filename().string(), [path] { return load_model(path); }};
}

ModelSource memory_source(LoadedModel model) {
  auto shared = std::make_shared<LoadedModel>(std::move(model));
  return {shared->manifest.model_id, [shared] { return *shared; }};
}

// ---- section framing ----------------------------------------------------

namespace {

std::string tag_str(const uint8_t* tag) { return std::string(tag, tag + 4); }

// Sections are split into fixed-size frames, each independently run through
// the backend (or stored when that does not help). Frames make both
// directions parallel and keep the bytes identical for any worker count.
std::vector<uint8_t> encode_section_body(const std::vector<uint8_t>& raw,
                                         const LosslessBackend* backend, unsigned workers) {
  size_t frame_count = (raw.size() + kFrameSize - 1) / kFrameSize;
  std::vector<std::pair<uint8_t, std::vector<uint8_t>>> frames(frame_count);
  parallel_for(frame_count, workers, [&](size_t i) {
    size_t off = i * size_t(kFrameSize);
    size_t len = std::min(size_t(kFrameSize), raw.size() - off);
    std::span<const uint8_t> slice(raw.data() + off, len);
    if (backend) {
      auto comp = backend->compress(slice);
      if (comp.size() < len) {
        frames[i] = {1, std::move(comp)};
        return;
      }
    }
    frames[i] = {0, std::vector<uint8_t>(slice.begin(), slice.end())};
  });
  std::vector<uint8_t> out;
  put_le<uint32_t>(out, kFrameSize);
  put_le<uint32_t>(out, uint32_t(frame_count));
  for (auto& [mode, bytes] : frames) {
    out.push_back(mode);
    put_le<uint64_t>(out, bytes.size());
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

std::vector<uint8_t> decode_section_body(std::span<const uint8_t> enc, uint64_t raw_len,
                                         const LosslessBackend& backend, unsigned workers,
                                         const std::string& what) {
  ByteReader r(enc, what);
  uint32_t frame_size = r.get_le<uint32_t>();
  uint32_t frame_count = r.get_le<uint32_t>();
  if (frame_size == 0) throw CorruptionError(what + ": zero frame size");
  uint64_t expect_frames = (raw_len + frame_size - 1) / frame_size;
  if (frame_count != expect_frames)
    throw CorruptionError(what + ": frame count does not match section length");
  struct Frame {
    uint8_t mode;
    std::span<const uint8_t> bytes;
  };
  std::vector<Frame> frames(frame_count);
  for (uint32_t i = 0; i < frame_count; ++i) {
    r.need(1);
    uint8_t mode = r.get_bytes(1)[0];
    if (mode > 1) throw CorruptionError(what + ": bad frame mode");
    uint64_t len = r.get_le<uint64_t>();
    frames[i] = {mode, r.get_bytes(size_t(len))};
  }
  if (!r.at_end()) throw CorruptionError(what + ": trailing bytes after frames");
  std::vector<uint8_t> raw(static_cast<size_t>(raw_len));
  parallel_for(frame_count, workers, [&](size_t i) {
    size_t off = i * size_t(frame_size);
    size_t len = std::min(size_t(frame_size), size_t(raw_len) - off);
    if (frames[i].mode == 0) {
      if (frames[i].bytes.size() != len)
        throw CorruptionError(what + ": stored frame " + std::to_string(i) + " length mismatch");
      std::memcpy(raw.data() + off, frames[i].bytes.data(), len);
    } else {
      std::vector<uint8_t> dec;
      try {
        dec = backend.decompress(frames[i].bytes, len);
      } catch (const CorruptionError& e) {
        throw CorruptionError(what + ": frame " + std::to_string(i) + ": " + e.what());
      }
      std::memcpy(raw.data() + off, dec.data(), len);
    }
  });
  return raw;
}

void append_section(std::vector<uint8_t>& file, const uint8_t* tag,
                    const std::vector<uint8_t>& raw, const LosslessBackend* backend,
                    unsigned workers) {
  auto enc = encode_section_body(raw, backend, workers);
  file.insert(file.end(), tag, tag + 4);
  put_le<uint64_t>(file, raw.size());
  put_le<uint64_t>(file, enc.size());
  put_le<uint32_t>(file, crc32c(enc));
  file.insert(file.end(), enc.begin(), enc.end());
}

// ---- per-model compression plan -----------------------------------------

struct StreamPlan {
  FloatKind kind = FloatKind::kF32;
  uint64_t param_count = 0;
  std::vector<uint8_t> payload;
  std::vector<uint64_t> block_bytes;  // ELF only
  uint64_t st2_offset = 0;            // assigned at assembly
  uint64_t byte_len = 0;              // assigned at assembly
};

struct RawPiece {
  uint32_t tensor;
  std::vector<uint8_t> bytes;
  uint64_t raw_offset = 0;  // assigned at assembly
};

struct ModelPlan {
  ModelManifest manifest;
  uint64_t input_bytes = 0;
  MethodTag stage2 = MethodTag::kRaw;
  std::vector<MethodTag> tensor_tags;
  std::vector<uint64_t> tensor_dup_id;
  std::vector<RawPiece> raw_pieces;  // tensor order
  std::vector<StreamPlan> streams;   // kind order
};

std::vector<uint8_t> elf_stream_payload(const FloatStream& s, uint64_t block_params,
                                        std::vector<uint64_t>& block_bytes) {
  unsigned w = float_kind_width(s.kind);
  std::vector<uint8_t> payload;
  block_bytes.clear();
  for (uint64_t start = 0; start < s.param_count; start += block_params) {
    uint64_t n = std::min(block_params, s.param_count - start);
    ElfBlock b = elf_compress_block_bytes(
        std::span<const uint8_t>(s.data.data() + start * w, size_t(n * w)), s.kind);
    auto bytes = serialize_elf_block(b);
    block_bytes.push_back(bytes.size());
    payload.insert(payload.end(), bytes.begin(), bytes.end());
  }
  return payload;
}

ModelPlan plan_model(const LoadedModel& mod, const std::vector<uint64_t>* dup_ids,
                     const std::vector<std::vector<uint8_t>>* dup_bytes,
                     const CompressOptions& opt) {
  ModelPlan plan;
  plan.manifest = mod.manifest;
  plan.input_bytes = serialized_model_size(mod.manifest);
  const size_t T = mod.manifest.tensors.size();
  if (dup_ids && dup_ids->size() != T)
    throw std::runtime_error("model '" + mod.manifest.model_id +
                             "' changed while being compressed");
  plan.tensor_tags.assign(T, MethodTag::kRaw);
  plan.tensor_dup_id.assign(T, 0);

  std::vector<bool> in_stream(T, false);
  std::vector<uint32_t> raw_tensors;
  for (uint32_t t = 0; t < T; ++t) {
    uint64_t dup = dup_ids ? (*dup_ids)[t] : UINT64_MAX;
    if (dup != UINT64_MAX) {
      plan.tensor_tags[t] = MethodTag::kDedupRef;
      plan.tensor_dup_id[t] = dup;
      if (opt.paranoid) {
        auto mine = mod.layer_bytes(t);
        const auto& stored = (*dup_bytes)[dup];
        if (mine.size() != stored.size() ||
            (mine.size() && std::memcmp(mine.data(), stored.data(), mine.size()) != 0))
          throw std::runtime_error("dedup: fingerprint collision on model '" +
                                   mod.manifest.model_id + "' tensor '" +
                                   mod.manifest.tensors[t].name + "'");
      }
    } else if (mod.manifest.tensors[t].dtype.is_float()) {
      in_stream[t] = true;
    } else {
      raw_tensors.push_back(t);
    }
  }

  auto streams = flatten_float_layers(mod, &in_stream);

  uint64_t raw_total = 0;
  for (const auto& s : streams) raw_total += s.data.size();

  // Candidate sizes are the serialized stage-2 bytes, measured before the
  // final stage. The DE plan keeps F16 streams raw since the coder only
  // takes 32- and 64-bit elements.
  std::vector<StreamPlan> elf_plans;
  uint64_t elf_total = UINT64_MAX;
  if (opt.stage_elf && raw_total > 0) {
    elf_total = 0;
    for (const auto& s : streams) {
      StreamPlan p;
      p.kind = s.kind;
      p.param_count = s.param_count;
      p.payload = elf_stream_payload(s, opt.elf_block_params, p.block_bytes);
      elf_total += p.payload.size();
      elf_plans.push_back(std::move(p));
    }
  }

  std::vector<StreamPlan> de_plans;
  uint64_t de_total = UINT64_MAX;
  if (opt.stage_de && raw_total > 0) {
    de_total = 0;
    for (const auto& s : streams) {
      if (s.kind == FloatKind::kF16) {
        de_total += s.data.size();
        continue;
      }
      if (s.param_count > UINT32_MAX)
        throw std::invalid_argument("model '" + mod.manifest.model_id +
                                    "': float stream too large for duplicate coding");
      StreamPlan p;
      p.kind = s.kind;
      p.param_count = s.param_count;
      p.payload = serialize_de_stream(de_compress_bytes(s.data, float_kind_width(s.kind)));
      de_total += p.payload.size();
      de_plans.push_back(std::move(p));
    }
  }

  plan.stage2 = raw_total == 0 ? MethodTag::kRaw : select_stage2(de_total, elf_total, raw_total);

  if (plan.stage2 == MethodTag::kElf) {
    plan.streams = std::move(elf_plans);
    for (uint32_t t = 0; t < T; ++t)
      if (in_stream[t]) plan.tensor_tags[t] = MethodTag::kElf;
  } else if (plan.stage2 == MethodTag::kDe) {
    plan.streams = std::move(de_plans);
    for (uint32_t t = 0; t < T; ++t)
      if (in_stream[t]) {
        bool f16 = mod.manifest.tensors[t].dtype.tag == DtypeTag::kF16;
        plan.tensor_tags[t] = f16 ? MethodTag::kRaw : MethodTag::kDe;
        if (f16) raw_tensors.push_back(t);
      }
  } else {
    for (uint32_t t = 0; t < T; ++t)
      if (in_stream[t]) raw_tensors.push_back(t);
  }

  std::sort(raw_tensors.begin(), raw_tensors.end());
  for (uint32_t t : raw_tensors) {
    auto b = mod.layer_bytes(t);
    plan.raw_pieces.push_back({t, std::vector<uint8_t>(b.begin(), b.end())});
  }
  return plan;
}

}  // namespace

// ---- compression ---------------------------------------------------------

CompressResult compress_corpus(std::span<const ModelSource> sources,
                               const std::filesystem::path& out_path,
                               const CompressOptions& opt) {
  validate_options(opt);
  unsigned workers = opt.workers ? opt.workers : default_workers();
  const size_t M = sources.size();
  {
    std::set<std::string> ids;
    for (const auto& s : sources)
      if (!ids.insert(s.model_id).second)
        throw std::invalid_argument("duplicate model id '" + s.model_id + "'");
  }

  // Stage 1: fingerprint every layer, then collapse duplicated fingerprints
  // onto a dup store. Index construction is serial in scan order, so the
  // outcome does not depend on worker count.
  std::vector<std::vector<uint64_t>> dup_id_of(M);  // per model/tensor, UINT64_MAX = unique
  std::vector<Digest256> dup_digests;
  std::vector<std::pair<uint32_t, uint32_t>> dup_loc;  // first occurrence
  std::vector<std::vector<uint8_t>> dup_bytes;
  if (opt.stage_dedup) {
    std::vector<std::vector<Digest256>> digests(M);
    parallel_for(M, workers, [&](size_t m) {
      LoadedModel mod = sources[m].load();
      auto& d = digests[m];
      d.reserve(mod.manifest.tensors.size());
      for (uint32_t t = 0; t < mod.manifest.tensors.size(); ++t)
        d.push_back(fingerprint_layer(mod.layer_bytes(t)));
    });
    struct Group {
      uint32_t count = 0;
      uint32_t model = 0, tensor = 0;  // first occurrence
      uint64_t dup_id = UINT64_MAX;
    };
    std::map<Digest256, Group> groups;
    for (uint32_t m = 0; m < M; ++m)
      for (uint32_t t = 0; t < digests[m].size(); ++t) {
        auto [it, fresh] = groups.try_emplace(digests[m][t]);
        if (fresh) {
          it->second.model = m;
          it->second.tensor = t;
        }
        ++it->second.count;
      }
    for (uint32_t m = 0; m < M; ++m) {
      dup_id_of[m].assign(digests[m].size(), UINT64_MAX);
      for (uint32_t t = 0; t < digests[m].size(); ++t) {
        Group& g = groups[digests[m][t]];
        if (g.count < 2) continue;
        if (g.dup_id == UINT64_MAX) {  // first duplicated digest in scan order
          g.dup_id = dup_digests.size();
          dup_digests.push_back(digests[m][t]);
          dup_loc.emplace_back(g.model, g.tensor);
        }
        dup_id_of[m][t] = g.dup_id;
      }
    }
    // Pull the dup-store payloads from their owning models.
    dup_bytes.resize(dup_loc.size());
    std::vector<uint32_t> owners;
    std::vector<std::vector<uint64_t>> owned(M);
    for (uint64_t j = 0; j < dup_loc.size(); ++j) {
      uint32_t m = dup_loc[j].first;
      if (owned[m].empty()) owners.push_back(m);
      owned[m].push_back(j);
    }
    parallel_for(owners.size(), workers, [&](size_t i) {
      LoadedModel mod = sources[owners[i]].load();
      for (uint64_t j : owned[owners[i]]) {
        auto b = mod.layer_bytes(dup_loc[j].second);
        dup_bytes[j].assign(b.begin(), b.end());
      }
    });
  }

  // Stage 2: per-model float-stream coding and method selection.
  std::vector<ModelPlan> plans(M);
  parallel_for(M, workers, [&](size_t m) {
    LoadedModel mod = sources[m].load();
    if (mod.manifest.model_id.empty()) mod.manifest.model_id = sources[m].model_id;
    plans[m] = plan_model(mod, opt.stage_dedup ? &dup_id_of[m] : nullptr,
                          opt.stage_dedup ? &dup_bytes : nullptr, opt);
  });

  // Assembly: dup store first, then per-model raw pieces, in scan order.
  std::vector<uint8_t> raw_sec;
  std::vector<std::pair<uint64_t, uint64_t>> dup_extent(dup_bytes.size());
  for (size_t j = 0; j < dup_bytes.size(); ++j) {
    dup_extent[j] = {raw_sec.size(), dup_bytes[j].size()};
    raw_sec.insert(raw_sec.end(), dup_bytes[j].begin(), dup_bytes[j].end());
    dup_bytes[j].clear();
    dup_bytes[j].shrink_to_fit();
  }
  std::vector<uint8_t> st2_sec;
  for (ModelPlan& plan : plans) {
    for (RawPiece& p : plan.raw_pieces) {
      p.raw_offset = raw_sec.size();
      raw_sec.insert(raw_sec.end(), p.bytes.begin(), p.bytes.end());
      p.bytes.clear();
      p.bytes.shrink_to_fit();
    }
    for (StreamPlan& s : plan.streams) {
      s.st2_offset = st2_sec.size();
      s.byte_len = s.payload.size();
      st2_sec.insert(st2_sec.end(), s.payload.begin(), s.payload.end());
      s.payload.clear();
      s.payload.shrink_to_fit();
    }
  }

  std::vector<uint8_t> index_sec;
  put_le<uint32_t>(index_sec, uint32_t(M));
  put_le<uint64_t>(index_sec, dup_digests.size());
  for (size_t j = 0; j < dup_digests.size(); ++j) {
    index_sec.insert(index_sec.end(), dup_digests[j].begin(), dup_digests[j].end());
    put_le<uint64_t>(index_sec, dup_extent[j].first);
    put_le<uint64_t>(index_sec, dup_extent[j].second);
  }
  for (const ModelPlan& plan : plans) {
    put_string(index_sec, plan.manifest.model_id);
    put_le<uint64_t>(index_sec, plan.input_bytes);
    index_sec.push_back(uint8_t(plan.stage2));
    put_le<uint32_t>(index_sec, uint32_t(plan.manifest.tensors.size()));
    std::map<uint32_t, const RawPiece*> raw_by_tensor;
    for (const RawPiece& p : plan.raw_pieces) raw_by_tensor[p.tensor] = &p;
    for (uint32_t t = 0; t < plan.manifest.tensors.size(); ++t) {
      const TensorMeta& tm = plan.manifest.tensors[t];
      put_string(index_sec, tm.name);
      put_string(index_sec, tm.dtype.str);
      index_sec.push_back(uint8_t(tm.dtype.tag));
      if (tm.dtype.tag == DtypeTag::kOther) put_le<uint32_t>(index_sec, tm.dtype.other_width);
      if (tm.shape.size() > 255)
        throw std::invalid_argument("tensor '" + tm.name + "': rank above 255");
      index_sec.push_back(uint8_t(tm.shape.size()));
      for (uint64_t d : tm.shape) put_le<uint64_t>(index_sec, d);
      index_sec.push_back(uint8_t(plan.tensor_tags[t]));
      if (plan.tensor_tags[t] == MethodTag::kDedupRef)
        put_le<uint64_t>(index_sec, plan.tensor_dup_id[t]);
      else if (plan.tensor_tags[t] == MethodTag::kRaw)
        put_le<uint64_t>(index_sec, raw_by_tensor.at(t)->raw_offset);
    }
    index_sec.push_back(uint8_t(plan.streams.size()));
    for (const StreamPlan& s : plan.streams) {
      index_sec.push_back(uint8_t(s.kind));
      put_le<uint64_t>(index_sec, s.param_count);
      put_le<uint64_t>(index_sec, s.st2_offset);
      put_le<uint64_t>(index_sec, s.byte_len);
      if (plan.stage2 == MethodTag::kElf) {
        put_le<uint32_t>(index_sec, uint32_t(s.block_bytes.size()));
        for (uint64_t b : s.block_bytes) put_le<uint64_t>(index_sec, b);
      }
    }
  }

  const LosslessBackend* backend = opt.stage_final ? find_backend(opt.backend_id) : nullptr;
  std::vector<uint8_t> file;
  file.insert(file.end(), kMagic, kMagic + 4);
  put_le<uint32_t>(file, kVersion);
  put_le<uint32_t>(file, backend ? backend->id() : kBackendStore);
  put_le<uint32_t>(file, 3);
  append_section(file, kTagIndex, index_sec, backend, workers);
  append_section(file, kTagRaw, raw_sec, backend, workers);
  append_section(file, kTagStage2, st2_sec, backend, workers);
  write_file_atomic(out_path, file);

  CompressResult res;
  res.archive_bytes = file.size();
  for (size_t m = 0; m < M; ++m) {
    ModelResult mr;
    mr.model_id = plans[m].manifest.model_id;
    mr.input_bytes = plans[m].input_bytes;
    mr.stage2_method = plans[m].stage2;
    for (const RawPiece& p : plans[m].raw_pieces)
      mr.payload_bytes += plans[m].manifest.tensors[p.tensor].data_len;
    for (const StreamPlan& s : plans[m].streams) mr.payload_bytes += s.byte_len;
    res.input_bytes += mr.input_bytes;
    res.models.push_back(std::move(mr));
  }
  // Dup-store bytes are attributed to the owning model.
  for (size_t j = 0; j < dup_loc.size(); ++j)
    res.models[dup_loc[j].first].payload_bytes += dup_extent[j].second;
  return res;
}

// ---- decompression -------------------------------------------------------

namespace {

struct TensorEntry {
  std::string name;
  Dtype dtype;
  std::vector<uint64_t> shape;
  MethodTag method = MethodTag::kRaw;
  uint64_t locator = 0;  // dup id or raw offset
};

struct StreamEntry {
  FloatKind kind = FloatKind::kF32;
  uint64_t param_count = 0;
  uint64_t st2_offset = 0;
  uint64_t byte_len = 0;
  std::vector<uint64_t> block_bytes;
};

struct ModelEntry {
  std::string model_id;
  uint64_t input_bytes = 0;
  MethodTag stage2 = MethodTag::kRaw;
  std::vector<TensorEntry> tensors;
  std::vector<StreamEntry> streams;
};

struct ArchiveIndex {
  uint32_t version = 0;
  uint32_t backend_id = 0;
  std::vector<std::pair<uint64_t, uint64_t>> dup_extent;
  std::vector<Digest256> dup_digests;
  std::vector<ModelEntry> models;
};

MethodTag parse_method(uint8_t v, const std::string& what) {
  if (v > uint8_t(MethodTag::kDe)) throw CorruptionError(what + ": unknown method tag");
  return MethodTag(v);
}

ArchiveIndex parse_index(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, "archive index");
  ArchiveIndex idx;
  uint32_t model_count = r.get_le<uint32_t>();
  uint64_t dup_count = r.get_le<uint64_t>();
  for (uint64_t j = 0; j < dup_count; ++j) {
    Digest256 d;
    auto b = r.get_bytes(32);
    std::copy(b.begin(), b.end(), d.begin());
    idx.dup_digests.push_back(d);
    uint64_t off = r.get_le<uint64_t>();
    uint64_t len = r.get_le<uint64_t>();
    idx.dup_extent.emplace_back(off, len);
  }
  for (uint32_t m = 0; m < model_count; ++m) {
    ModelEntry me;
    me.model_id = r.get_string();
    me.input_bytes = r.get_le<uint64_t>();
    std::string what = "archive index: model '" + me.model_id + "'";
    me.stage2 = parse_method(r.get_bytes(1)[0], what);
    uint32_t tensor_count = r.get_le<uint32_t>();
    for (uint32_t t = 0; t < tensor_count; ++t) {
      TensorEntry te;
      te.name = r.get_string();
      te.dtype.str = r.get_string();
      uint8_t tag = r.get_bytes(1)[0];
      if (tag > uint8_t(DtypeTag::kOther))
        throw CorruptionError(what + " tensor '" + te.name + "': unknown dtype tag");
      te.dtype.tag = DtypeTag(tag);
      if (te.dtype.tag == DtypeTag::kOther) {
        te.dtype.other_width = r.get_le<uint32_t>();
        if (te.dtype.other_width == 0)
          throw CorruptionError(what + " tensor '" + te.name + "': zero element width");
      }
      uint8_t rank = r.get_bytes(1)[0];
      for (unsigned d = 0; d < rank; ++d) te.shape.push_back(r.get_le<uint64_t>());
      te.method = parse_method(r.get_bytes(1)[0], what + " tensor '" + te.name + "'");
      if (te.method == MethodTag::kDedupRef || te.method == MethodTag::kRaw)
        te.locator = r.get_le<uint64_t>();
      if (te.method == MethodTag::kDedupRef && te.locator >= dup_count)
        throw CorruptionError(what + " tensor '" + te.name + "': dup reference out of range");
      me.tensors.push_back(std::move(te));
    }
    uint8_t stream_count = r.get_bytes(1)[0];
    for (unsigned s = 0; s < stream_count; ++s) {
      StreamEntry se;
      uint8_t kind = r.get_bytes(1)[0];
      if (kind > 2) throw CorruptionError(what + ": unknown stream dtype");
      se.kind = FloatKind(kind);
      se.param_count = r.get_le<uint64_t>();
      se.st2_offset = r.get_le<uint64_t>();
      se.byte_len = r.get_le<uint64_t>();
      if (me.stage2 == MethodTag::kElf) {
        uint32_t blocks = r.get_le<uint32_t>();
        uint64_t sum = 0;
        for (uint32_t b = 0; b < blocks; ++b) {
          se.block_bytes.push_back(r.get_le<uint64_t>());
          sum += se.block_bytes.back();
        }
        if (sum != se.byte_len)
          throw CorruptionError(what + ": block index does not sum to stream length");
      }
      me.streams.push_back(std::move(se));
    }
    idx.models.push_back(std::move(me));
  }
  if (!r.at_end()) throw CorruptionError("archive index: trailing bytes");
  return idx;
}

struct RawSections {
  ArchiveIndex index;
  std::vector<uint8_t> raw;
  std::vector<uint8_t> st2;
};

// `payload` controls whether the RAW/ST20 sections are decoded or skipped.
RawSections read_archive(const std::filesystem::path& path, unsigned workers, bool payload) {
  auto file = read_file(path);
  ByteReader r(file, "archive");
  auto magic = r.get_bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw CorruptionError("archive: bad magic; not an archive file");
  RawSections out;
  out.index.version = r.get_le<uint32_t>();
  if (out.index.version != kVersion)
    throw CorruptionError("archive: unsupported version " + std::to_string(out.index.version));
  out.index.backend_id = r.get_le<uint32_t>();
  const LosslessBackend* backend = find_backend(out.index.backend_id);
  if (!backend)
    throw UnsupportedBackendError(
        "archive was written with final-stage backend id " +
        std::to_string(out.index.backend_id) + ", which this build does not provide");
  uint32_t section_count = r.get_le<uint32_t>();
  if (section_count != 3) throw CorruptionError("archive: expected 3 sections");

  const uint8_t* expected[3] = {kTagIndex, kTagRaw, kTagStage2};
  for (int s = 0; s < 3; ++s) {
    auto tag = r.get_bytes(4);
    if (std::memcmp(tag.data(), expected[s], 4) != 0)
      throw CorruptionError("archive: unexpected section '" +
                            std::string(tag.begin(), tag.end()) + "'");
    std::string what = "archive section " + tag_str(expected[s]);
    uint64_t raw_len = r.get_le<uint64_t>();
    uint64_t enc_len = r.get_le<uint64_t>();
    uint32_t crc = r.get_le<uint32_t>();
    auto enc = r.get_bytes(size_t(enc_len));
    if (s > 0 && !payload) continue;
    if (crc32c(enc) != crc) throw CorruptionError(what + ": checksum mismatch");
    auto raw = decode_section_body(enc, raw_len, *backend, workers, what);
    if (s == 0)
      out.index = [&] {
        ArchiveIndex idx = parse_index(raw);
        idx.version = out.index.version;
        idx.backend_id = out.index.backend_id;
        return idx;
      }();
    else if (s == 1)
      out.raw = std::move(raw);
    else
      out.st2 = std::move(raw);
  }
  if (!r.at_end()) throw CorruptionError("archive: trailing bytes after sections");
  return out;
}

uint64_t checked_extent(const TensorEntry& te, const std::string& what) {
  uint64_t n = 1;
  for (uint64_t d : te.shape) {
    if (d != 0 && n > UINT64_MAX / d) throw CorruptionError(what + ": shape overflow");
    n *= d;
  }
  unsigned w = te.dtype.element_width();
  if (w != 0 && n > UINT64_MAX / w) throw CorruptionError(what + ": extent overflow");
  return n;
}

LoadedModel rebuild_model(const ModelEntry& me, const RawSections& sec, unsigned workers) {
  std::string what = "model '" + me.model_id + "'";
  LoadedModel out;
  out.manifest.model_id = me.model_id;
  uint64_t off = 0;
  for (const TensorEntry& te : me.tensors) {
    TensorMeta tm;
    tm.name = te.name;
    tm.dtype = te.dtype;
    tm.shape = te.shape;
    uint64_t elems = checked_extent(te, what + " tensor '" + te.name + "'");
    tm.data_len = elems * tm.dtype.element_width();
    tm.data_offset = off;
    off += tm.data_len;
    out.manifest.tensors.push_back(std::move(tm));
  }
  out.manifest.payload_bytes = off;
  out.data.assign(size_t(off), 0);

  for (uint32_t t = 0; t < me.tensors.size(); ++t) {
    const TensorEntry& te = me.tensors[t];
    const TensorMeta& tm = out.manifest.tensors[t];
    std::string twhat = what + " tensor '" + te.name + "'";
    if (te.method == MethodTag::kDedupRef) {
      auto [doff, dlen] = sec.index.dup_extent[te.locator];
      if (dlen != tm.data_len)
        throw CorruptionError(twhat + ": dup store length does not match tensor extent");
      if (doff + dlen > sec.raw.size())
        throw CorruptionError(twhat + ": dup store extent outside RAW0 section");
      std::memcpy(out.data.data() + tm.data_offset, sec.raw.data() + doff, size_t(dlen));
    } else if (te.method == MethodTag::kRaw) {
      if (te.locator + tm.data_len > sec.raw.size())
        throw CorruptionError(twhat + ": raw extent outside RAW0 section");
      std::memcpy(out.data.data() + tm.data_offset, sec.raw.data() + te.locator,
                  size_t(tm.data_len));
    }
  }

  // Float streams: decode, then scatter back over the member tensors in
  // manifest order (the same order flattening used).
  for (const StreamEntry& se : me.streams) {
    std::string swhat =
        what + " " + std::string(float_kind_name(se.kind)) + " stream";
    if (se.st2_offset + se.byte_len > sec.st2.size())
      throw CorruptionError(swhat + ": extent outside ST20 section");
    std::span<const uint8_t> payload(sec.st2.data() + se.st2_offset, size_t(se.byte_len));
    unsigned w = float_kind_width(se.kind);

    FloatStream fs;
    fs.kind = se.kind;
    fs.param_count = se.param_count;
    if (me.stage2 == MethodTag::kElf) {
      fs.data.resize(size_t(se.param_count) * w);
      size_t blocks = se.block_bytes.size();
      std::vector<uint64_t> block_off(blocks + 1, 0);
      for (size_t b = 0; b < blocks; ++b) block_off[b + 1] = block_off[b] + se.block_bytes[b];
      // Parameter offsets per block come from each block's own header.
      std::vector<uint64_t> param_off(blocks + 1, 0);
      for (size_t b = 0; b < blocks; ++b) {
        if (block_off[b] + 8 > payload.size())
          throw CorruptionError(swhat + " block " + std::to_string(b) + ": truncated");
        uint32_t pc;
        std::memcpy(&pc, payload.data() + block_off[b], 4);
        param_off[b + 1] = param_off[b] + pc;
      }
      if (param_off[blocks] != se.param_count)
        throw CorruptionError(swhat + ": blocks do not cover the stream");
      parallel_for(blocks, workers, [&](size_t b) {
        try {
          ElfBlock blk = parse_elf_block(
              payload.subspan(size_t(block_off[b]), size_t(se.block_bytes[b])), se.kind);
          auto bytes = elf_decompress_block(blk);
          std::memcpy(fs.data.data() + size_t(param_off[b]) * w, bytes.data(), bytes.size());
        } catch (const CorruptionError& e) {
          throw CorruptionError(swhat + " block " + std::to_string(b) + ": " + e.what());
        }
      });
    } else if (me.stage2 == MethodTag::kDe) {
      try {
        DeStream ds = parse_de_stream(payload, w);
        if (ds.param_count != se.param_count)
          throw CorruptionError("parameter count does not match the index");
        fs.data = de_decompress_bytes(ds);
      } catch (const CorruptionError& e) {
        throw CorruptionError(swhat + ": " + e.what());
      }
    } else {
      throw CorruptionError(swhat + ": streams present on a RAW model");
    }

    uint64_t pos = 0;
    for (uint32_t t = 0; t < me.tensors.size(); ++t) {
      if (me.tensors[t].dtype.tag != DtypeTag(se.kind)) continue;
      if (me.tensors[t].method != me.stage2) continue;
      const TensorMeta& tm = out.manifest.tensors[t];
      uint64_t params = tm.data_len / w;
      fs.extents.push_back({t, pos, params});
      pos += params;
    }
    if (pos != se.param_count)
      throw CorruptionError(swhat + ": member tensors do not cover the stream");
    scatter_float_stream(fs, out.manifest, out.data);
  }
  return out;
}

}  // namespace

std::vector<LoadedModel> decompress_corpus_to_memory(const std::filesystem::path& archive_path,
                                                     const DecompressOptions& opt) {
  unsigned workers = opt.workers ? opt.workers : default_workers();
  RawSections sec = read_archive(archive_path, workers, true);
  std::vector<LoadedModel> models(sec.index.models.size());
  parallel_for(models.size(), workers,
               [&](size_t m) { models[m] = rebuild_model(sec.index.models[m], sec, 1); });
  return models;
}

void decompress_corpus(const std::filesystem::path& archive_path,
                       const std::filesystem::path& out_dir, const DecompressOptions& opt) {
  unsigned workers = opt.workers ? opt.workers : default_workers();
  RawSections sec = read_archive(archive_path, workers, true);
  std::filesystem::create_directories(out_dir);
  parallel_for(sec.index.models.size(), workers, [&](size_t m) {
    LoadedModel model = rebuild_model(sec.index.models[m], sec, 1);
    write_model(model, out_dir / model.manifest.model_id);
  });
}

ArchiveInfo read_archive_info(const std::filesystem::path& archive_path) {
  RawSections sec = read_archive(archive_path, 1, false);
  ArchiveInfo info;
  info.version = sec.index.version;
  info.backend_id = sec.index.backend_id;
  if (const LosslessBackend* b = find_backend(sec.index.backend_id))
    info.backend_name = b->name();
  info.stored_dup_layers = sec.index.dup_extent.size();
  for (const ModelEntry& me : sec.index.models) {
    ArchiveModelInfo mi;
    mi.model_id = me.model_id;
    mi.input_bytes = me.input_bytes;
    mi.stage2_method = me.stage2;
    for (const TensorEntry& te : me.tensors)
      mi.tensors.push_back({te.name, te.dtype.str, te.method});
    info.models.push_back(std::move(mi));
  }
  return info;
}

std::vector<AblationRow> ablation_run(std::span<const ModelSource> sources,
                                      const std::filesystem::path& scratch_dir,
                                      const CompressOptions& base) {
  struct Step {
    const char* label;
    bool dedup, de, elf, final_;
  };
  const Step ladder[] = {
      {"raw", false, false, false, false},
      {"dedup", true, false, false, false},
      {"dedup+de", true, true, false, false},
      {"dedup+de+elf", true, true, true, false},
      {"full", true, true, true, true},
  };
  std::filesystem::create_directories(scratch_dir);
  std::vector<AblationRow> rows;
  for (const Step& step : ladder) {
    CompressOptions opt = base;
    opt.stage_dedup = step.dedup;
    opt.stage_de = step.de;
    opt.stage_elf = step.elf;
    opt.stage_final = step.final_;
    auto path = scratch_dir / (std::string(step.label) + ".elvs");
    CompressResult res = compress_corpus(sources, path, opt);
    AblationRow row;
    row.label = step.label;
    row.options = opt;
    row.input_bytes = res.input_bytes;
    row.archive_bytes = res.archive_bytes;
    row.compression_ratio = res.compression_ratio();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace elves

