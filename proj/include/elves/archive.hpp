#pragma once

#include <filesystem>
#include <functional>
#include <span>

#include "elves/backend.hpp"
#include "elves/model.hpp"

namespace elves {

// Corpus archive: layer dedup, then per-model duplicate- or exponent-coding
// of the float parameter streams (whichever measures smaller), then a
// pluggable lossless final stage over the container sections.

enum class MethodTag : uint8_t { kDedupRef = 0, kRaw = 1, kElf = 2, kDe = 3 };
const char* method_tag_name(MethodTag t);

struct CompressOptions {
  bool stage_dedup = true;
  bool stage_de = true;
  bool stage_elf = true;
  bool stage_final = true;
  uint32_t backend_id = kBackendDeflate;  // used when stage_final is on
  unsigned workers = 0;                   // 0 = hardware concurrency
  uint64_t elf_block_params = uint64_t(1) << 22;  // power of two, >= 2^16
  bool paranoid = false;                  // byte-compare layers on digest match
};

void validate_options(const CompressOptions& opt);

struct ModelSource {
  std::string model_id;
  std::function<LoadedModel()> load;  // may be called several times per compression
};
ModelSource file_source(const std::filesystem::path& path);
ModelSource memory_source(LoadedModel model);

struct ModelResult {
  std::string model_id;
  uint64_t input_bytes = 0;    // serialized model size
  uint64_t payload_bytes = 0;  // bytes this model contributes before the final stage
  MethodTag stage2_method = MethodTag::kRaw;  // winner for its float streams
};

struct CompressResult {
  uint64_t input_bytes = 0;
  uint64_t archive_bytes = 0;
  std::vector<ModelResult> models;
  double compression_ratio() const {
    return archive_bytes ? double(input_bytes) / double(archive_bytes) : 0.0;
  }
};

CompressResult compress_corpus(std::span<const ModelSource> sources,
                               const std::filesystem::path& out_path,
                               const CompressOptions& opt = {});

struct DecompressOptions {
  unsigned workers = 0;
};
// Writes one safetensors file per model into out_dir.
void decompress_corpus(const std::filesystem::path& archive_path,
                       const std::filesystem::path& out_dir,
                       const DecompressOptions& opt = {});
std::vector<LoadedModel> decompress_corpus_to_memory(const std::filesystem::path& archive_path,
                                                     const DecompressOptions& opt = {});

// Header + per-layer coding decisions, without decoding payloads.
struct ArchiveTensorInfo {
  std::string name;
  std::string dtype;
  MethodTag method = MethodTag::kRaw;
};
struct ArchiveModelInfo {
  std::string model_id;
  uint64_t input_bytes = 0;
  MethodTag stage2_method = MethodTag::kRaw;
  std::vector<ArchiveTensorInfo> tensors;
};
struct ArchiveInfo {
  uint32_t version = 0;
  uint32_t backend_id = 0;
  std::string backend_name;  // empty when this build lacks the backend
  uint64_t stored_dup_layers = 0;
  std::vector<ArchiveModelInfo> models;
};
ArchiveInfo read_archive_info(const std::filesystem::path& archive_path);

// Picks the float-stream coding for one model from measured candidate sizes
// (UINT64_MAX marks a disabled candidate): the smaller of DE and ELF, ties
// to ELF, and RAW whenever the winner would exceed the raw stream bytes.
MethodTag select_stage2(uint64_t de_bytes, uint64_t elf_bytes, uint64_t raw_bytes);

// ---- stage ablation -----------------------------------------------------

struct AblationRow {
  std::string label;
  CompressOptions options;
  uint64_t input_bytes = 0;
  uint64_t archive_bytes = 0;
  double compression_ratio = 0;
};
// Runs the standard ladder (raw container, +dedup, +dedup/de, +dedup/de/elf,
// everything + final stage) against the same corpus.
std::vector<AblationRow> ablation_run(std::span<const ModelSource> sources,
                                      const std::filesystem::path& scratch_dir,
                                      const CompressOptions& base = {});

}  // namespace elves
