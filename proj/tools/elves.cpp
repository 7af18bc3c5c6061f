// Command-line front end: compress / decompress / info / analyze / verify /
// bench over safetensors model corpora.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "elves/analyzer.hpp"
#include "elves/archive.hpp"
#include "elves/io_util.hpp"
#include "elves/synth.hpp"
#include "elves/thread.hpp"

using namespace elves;

namespace {

enum ExitCode {
  kOk = 0,
  kUsage = 1,
  kIoFailure = 2,
  kBadData = 3,
  kNoBackend = 4,
  kVerifyFailed = 5,
};

unsigned workers_from_env(unsigned cli_value) {
  if (cli_value != 0) return cli_value;
  if (const char* env = std::getenv("ELVES_WORKERS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1 && v <= 4096) return unsigned(v);
    throw CLI::ValidationError("ELVES_WORKERS", "must be an integer in [1, 4096]");
  }
  return default_workers();
}

// Files as given; directories recurse for *.safetensors, sorted by path.
std::vector<std::filesystem::path> collect_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::filesystem::path> files;
  for (const std::string& in : inputs) {
    std::filesystem::path p(in);
    if (std::filesystem::is_directory(p)) {
      std::vector<std::filesystem::path> found;
      for (const auto& e : std::filesystem::recursive_directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".safetensors")
          found.push_back(e.path());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (std::filesystem::is_regular_file(p)) {
      files.push_back(p);
    } else {
      throw IoError("input '" + in + "' is not a file or directory");
    }
  }
  if (files.empty()) throw IoError("no input models found");
  return files;
}

std::vector<ModelSource> sources_for(const std::vector<std::filesystem::path>& files) {
  std::vector<ModelSource> s;
  s.reserve(files.size());
  for (const auto& f : files) s.push_back(file_source(f));
  return s;
}

std::vector<LoadedModel> load_all(const std::vector<std::filesystem::path>& files,
                                  unsigned workers) {
  std::vector<LoadedModel> models(files.size());
  parallel_for(files.size(), workers, [&](size_t i) { models[i] = load_model(files[i]); });
  return models;
}

void emit(const std::string& text, const std::string& out_file) {
  if (out_file.empty()) {
    std::fputs(text.c_str(), stdout);
    return;
  }
  write_file(out_file, {reinterpret_cast<const uint8_t*>(text.data()), text.size()});
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- subcommands --------------------------------------------------------

int run_compress(const std::vector<std::string>& inputs, const std::string& output,
                 CompressOptions opt, const std::string& backend_name) {
  if (!backend_name.empty()) {
    const LosslessBackend* b = find_backend_by_name(backend_name);
    if (!b) throw UnsupportedBackendError("unknown backend '" + backend_name + "'");
    opt.backend_id = b->id();
  }
  auto files = collect_inputs(inputs);
  auto sources = sources_for(files);
  auto t0 = std::chrono::steady_clock::now();
  CompressResult res = compress_corpus(sources, output, opt);
  double dt = seconds_since(t0);
  for (const ModelResult& m : res.models)
    std::printf("%-40s %10llu -> %10llu  %s\n", m.model_id.c_str(),
                (unsigned long long)m.input_bytes, (unsigned long long)m.payload_bytes,
                method_tag_name(m.stage2_method));
  std::printf("%zu models, %llu -> %llu bytes (ratio %.4f) in %.2fs [%.1f MB/s]\n",
              res.models.size(), (unsigned long long)res.input_bytes,
              (unsigned long long)res.archive_bytes, res.compression_ratio(), dt,
              dt > 0 ? double(res.input_bytes) / 1e6 / dt : 0.0);
  return kOk;
}

int run_decompress(const std::string& archive, const std::string& out_dir, unsigned workers) {
  auto t0 = std::chrono::steady_clock::now();
  decompress_corpus(archive, out_dir, {workers});
  std::printf("restored into %s in %.2fs\n", out_dir.c_str(), seconds_since(t0));
  return kOk;
}

int run_info(const std::string& archive, bool as_json) {
  ArchiveInfo info = read_archive_info(archive);
  if (as_json) {
    std::string s = "{\"version\":" + std::to_string(info.version) +
                    ",\"backend_id\":" + std::to_string(info.backend_id) +
                    ",\"backend\":\"" + info.backend_name +
                    "\",\"dup_layers\":" + std::to_string(info.stored_dup_layers) +
                    ",\"models\":" + std::to_string(info.models.size()) + "}\n";
    std::fputs(s.c_str(), stdout);
    return kOk;
  }
  std::printf("version %u, backend %s (id %u), %llu deduplicated layers, %zu models\n",
              info.version, info.backend_name.c_str(), info.backend_id,
              (unsigned long long)info.stored_dup_layers, info.models.size());
  for (const ArchiveModelInfo& m : info.models) {
    std::printf("  %-40s %10llu bytes  stage2=%s\n", m.model_id.c_str(),
                (unsigned long long)m.input_bytes, method_tag_name(m.stage2_method));
    for (const ArchiveTensorInfo& t : m.tensors)
      std::printf("    %-38s %-6s %s\n", t.name.c_str(), t.dtype.c_str(),
                  method_tag_name(t.method));
  }
  return kOk;
}

int run_analyze(const std::vector<std::string>& inputs, const std::string& report,
                size_t fsc_size, bool use_cdc, size_t granularity, unsigned stride,
                bool as_json, const std::string& out_file, unsigned workers) {
  auto files = collect_inputs(inputs);
  auto models = load_all(files, workers);

  if (report == "histogram") {
    ValueHistogram h;
    for (const LoadedModel& m : models) {
      ValueHistogram mh = param_value_histogram(m);
      h.total += mh.total;
      h.neg1_to_zero += mh.neg1_to_zero;
      h.zero_to_one += mh.zero_to_one;
      h.out_of_range += mh.out_of_range;
      h.nan_count += mh.nan_count;
      h.inf_count += mh.inf_count;
    }
    emit(as_json ? histogram_json(h) + "\n" : histogram_csv(h), out_file);
    return kOk;
  }
  if (report == "dup-ratio") {
    std::string s = as_json ? "[" : "model,dup_ratio_pct\n";
    for (size_t i = 0; i < models.size(); ++i) {
      double r = param_duplication_ratio(models[i]);
      char buf[160];
      if (as_json)
        std::snprintf(buf, sizeof buf, "%s{\"model\":\"%s\",\"dup_ratio_pct\":%.4f}",
                      i ? "," : "", models[i].manifest.model_id.c_str(), 100.0 * r);
      else
        std::snprintf(buf, sizeof buf, "%s,%.4f\n", models[i].manifest.model_id.c_str(),
                      100.0 * r);
      s += buf;
    }
    if (as_json) s += "]\n";
    emit(s, out_file);
    return kOk;
  }

  DupReport rep;
  if (report == "layer-dup") rep = layer_dup_report(models, workers);
  else if (report == "chunk-dup" && use_cdc) rep = chunk_dup_report_cdc(models, {}, workers);
  else if (report == "chunk-dup") rep = chunk_dup_report_fsc(models, fsc_size, workers);
  else if (report == "similarity") rep = similarity_report(models, granularity, stride, workers);
  else throw CLI::ValidationError("--report", "unknown report '" + report + "'");
  emit(as_json ? dup_report_json(rep) + "\n" : dup_report_csv(rep), out_file);
  return kOk;
}

int run_verify(const std::string& dir_a, const std::string& dir_b, bool as_json,
               const std::string& out_file, unsigned workers) {
  auto files_a = collect_inputs({dir_a});
  auto models_a = load_all(files_a, workers);
  bool all_ok = true;
  std::string text;
  for (const LoadedModel& a : models_a) {
    std::filesystem::path pb;
    if (std::filesystem::is_directory(dir_b)) pb = std::filesystem::path(dir_b) / a.manifest.model_id;
    else pb = dir_b;
    LoadedModel b = load_model(pb);
    ErrorReport rep = error_report(a, b);
    all_ok = all_ok && rep.all_ok;
    text += as_json ? error_report_json(rep) + "\n" : error_report_csv(rep);
  }
  emit(text, out_file);
  std::printf("verify: %s\n", all_ok ? "PASS" : "FAIL");
  return all_ok ? kOk : kVerifyFailed;
}

int run_bench(const std::string& synth_spec, unsigned preset_mb, const std::string& dir_opt,
              bool ablation, bool keep, unsigned workers, CompressOptions base) {
  std::vector<SynthModel> specs;
  if (!synth_spec.empty()) {
    auto bytes = read_file(synth_spec);
    specs = parse_synth_spec(std::string(bytes.begin(), bytes.end()));
  } else {
    // Default corpus: `preset_mb` of mixed models, 16 MiB each.
    unsigned count = std::max(1u, preset_mb / 16);
    for (unsigned i = 0; i < count; ++i) {
      SynthModel m;
      m.id = "bench_" + std::to_string(i);
      m.seed = 1000 + i;
      m.dup_ratio = (i % 3) * 0.2;
      m.in_range_fraction = 0.98;
      m.layers.push_back({"", DtypeTag::kF32, (uint64_t(16) << 20) / 4, 0});
      specs.push_back(std::move(m));
    }
  }

  std::filesystem::path dir = dir_opt.empty()
      ? std::filesystem::temp_directory_path() / "elves_bench"
      : std::filesystem::path(dir_opt);
  std::filesystem::path corpus = dir / "corpus";
  std::filesystem::path restored = dir / "restored";
  std::filesystem::create_directories(dir);
  std::printf("generating corpus under %s...\n", corpus.string().c_str());
  write_synth_corpus(specs, corpus);

  std::vector<std::string> inputs{corpus.string()};
  auto files = collect_inputs(inputs);
  auto sources = sources_for(files);
  uint64_t corpus_bytes = 0;
  for (const auto& f : files) corpus_bytes += std::filesystem::file_size(f);

  base.workers = workers;
  if (ablation) {
    auto rows = ablation_run(sources, dir / "ablation", base);
    std::printf("%-14s %14s %14s %8s\n", "stages", "input", "archive", "ratio");
    for (const AblationRow& r : rows)
      std::printf("%-14s %14llu %14llu %8.4f\n", r.label.c_str(),
                  (unsigned long long)r.input_bytes, (unsigned long long)r.archive_bytes,
                  r.compression_ratio);
  } else {
    std::filesystem::path archive = dir / "bench.elvs";
    auto t0 = std::chrono::steady_clock::now();
    CompressResult res = compress_corpus(sources, archive, base);
    double ct = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    decompress_corpus(archive, restored, {workers});
    double dt = seconds_since(t0);
    std::printf(
        "corpus %.1f MB | compress %.2fs (%.1f MB/s) | decompress %.2fs (%.1f MB/s) | "
        "ratio %.4f | workers %u\n",
        double(corpus_bytes) / 1e6, ct, double(corpus_bytes) / 1e6 / ct, dt,
        double(corpus_bytes) / 1e6 / dt, res.compression_ratio(), workers);
  }
  if (!keep) std::filesystem::remove_all(dir);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"storage compressor for safetensors model corpora"};
  app.require_subcommand(1);
  unsigned workers_flag = 0;
  app.add_option("--workers", workers_flag, "worker threads (default: ELVES_WORKERS or cores)")
      ->check(CLI::Range(1u, 4096u));

  // compress
  auto* c = app.add_subcommand("compress", "pack models into an archive");
  std::vector<std::string> c_inputs;
  std::string c_output, c_backend;
  CompressOptions c_opt;
  bool c_no_dedup = false, c_no_de = false, c_no_elf = false, c_no_final = false;
  c->add_option("inputs", c_inputs, "model files or directories")->required();
  c->add_option("-o,--output", c_output, "archive path")->required();
  c->add_flag("--no-dedup", c_no_dedup, "disable layer deduplication");
  c->add_flag("--no-de", c_no_de, "disable duplicate-parameter coding");
  c->add_flag("--no-elf", c_no_elf, "disable exponent-less float coding");
  c->add_flag("--no-final", c_no_final, "disable the final lossless stage");
  c->add_option("--backend", c_backend, "final-stage backend (store, deflate)");
  c->add_option("--block-size", c_opt.elf_block_params,
                "float-coder block size in parameters (power of two, >= 65536)");
  c->add_flag("--paranoid", c_opt.paranoid, "byte-compare layers on fingerprint match");

  // decompress
  auto* d = app.add_subcommand("decompress", "restore models from an archive");
  std::string d_archive, d_out;
  d->add_option("archive", d_archive, "archive path")->required();
  d->add_option("-o,--output", d_out, "output directory")->required();

  // info
  auto* n = app.add_subcommand("info", "show archive contents");
  std::string n_archive;
  bool n_json = false;
  n->add_option("archive", n_archive, "archive path")->required();
  n->add_flag("--json", n_json, "machine-readable output");

  // analyze
  auto* a = app.add_subcommand("analyze", "corpus statistics");
  std::vector<std::string> a_inputs;
  std::string a_report = "histogram", a_out;
  size_t a_fsc = 4096, a_granularity = 0;
  unsigned a_stride = 32;
  bool a_cdc = false, a_json = false;
  a->add_option("inputs", a_inputs, "model files or directories")->required();
  a->add_option("--report", a_report,
                "histogram | dup-ratio | layer-dup | chunk-dup | similarity");
  a->add_option("--fsc", a_fsc, "fixed chunk size in bytes for chunk-dup");
  a->add_flag("--cdc", a_cdc, "content-defined chunking for chunk-dup");
  a->add_option("--granularity", a_granularity,
                "similarity unit in bytes (0 = whole layers)");
  a->add_option("--stride", a_stride, "similarity sampling stride");
  a->add_flag("--json", a_json, "JSON instead of CSV");
  a->add_option("--out", a_out, "write the report to a file");

  // verify
  auto* v = app.add_subcommand("verify", "compare restored models against originals");
  std::string v_a, v_b, v_out;
  bool v_json = false;
  v->add_option("original", v_a, "original model file or directory")->required();
  v->add_option("restored", v_b, "restored model file or directory")->required();
  v->add_flag("--json", v_json, "JSON instead of CSV");
  v->add_option("--out", v_out, "write the report to a file");

  // bench
  auto* b = app.add_subcommand("bench", "generate a synthetic corpus and measure throughput");
  std::string b_spec, b_dir;
  unsigned b_preset = 256;
  bool b_ablation = false, b_keep = false;
  CompressOptions b_opt;
  b->add_option("--synth", b_spec, "synthetic corpus spec (JSON)");
  b->add_option("--size-mb", b_preset, "default corpus size when no spec is given");
  b->add_option("--dir", b_dir, "scratch directory");
  b->add_flag("--ablation", b_ablation, "run the stage ladder instead of one pass");
  b->add_flag("--keep", b_keep, "keep generated files");

  CLI11_PARSE(app, argc, argv);

  try {
    unsigned workers = workers_from_env(workers_flag);
    if (c->parsed()) {
      c_opt.stage_dedup = !c_no_dedup;
      c_opt.stage_de = !c_no_de;
      c_opt.stage_elf = !c_no_elf;
      c_opt.stage_final = !c_no_final;
      c_opt.workers = workers;
      return run_compress(c_inputs, c_output, c_opt, c_backend);
    }
    if (d->parsed()) return run_decompress(d_archive, d_out, workers);
    if (n->parsed()) return run_info(n_archive, n_json);
    if (a->parsed())
      return run_analyze(a_inputs, a_report, a_fsc, a_cdc, a_granularity, a_stride, a_json,
                         a_out, workers);
    if (v->parsed()) return run_verify(v_a, v_b, v_json, v_out, workers);
    if (b->parsed()) return run_bench(b_spec, b_preset, b_dir, b_ablation, b_keep, workers, b_opt);
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const UnsupportedBackendError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNoBackend;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kBadData;
  } catch (const CorruptionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kBadData;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIoFailure;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIoFailure;
  }
  return kUsage;
}
