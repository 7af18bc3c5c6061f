#include "elves/synth.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <random>

#include "elves/fp.hpp"
#include "elves/io_util.hpp"

namespace elves {

namespace {

uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t x = a + 0x9E3779B97F4A7C15ull * (b + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Uniform in [0, 1); hand-rolled so the byte streams never depend on the
// standard library's distribution implementations.
double unit(std::mt19937_64& eng) { return double(eng() >> 11) * 0x1p-53; }

Dtype dtype_for(DtypeTag tag) {
  Dtype d;
  d.tag = tag;
  switch (tag) {
    case DtypeTag::kF16: d.str = "F16"; break;
    case DtypeTag::kF32: d.str = "F32"; break;
    case DtypeTag::kF64: d.str = "F64"; break;
    case DtypeTag::kU8: d.str = "U8"; break;
    case DtypeTag::kI64: d.str = "I64"; break;
    case DtypeTag::kBool: d.str = "BOOL"; break;
    default: throw std::invalid_argument("synth: unsupported dtype");
  }
  return d;
}

// One fresh float pattern. In-range values stay below 0.996 in magnitude so
// every dtype keeps them strictly inside (-1, 1) after rounding.
uint64_t fresh_pattern(std::mt19937_64& eng, const SynthModel& spec, FloatKind kind) {
  double v;
  if (unit(eng) < spec.in_range_fraction) {
    v = (unit(eng) * 2.0 - 1.0) * 0.996;
  } else if (spec.special_fraction > 0 && unit(eng) < spec.special_fraction) {
    double r = unit(eng);
    v = r < 0.5 ? std::numeric_limits<double>::quiet_NaN()
                : (r < 0.75 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity());
  } else {
    v = (1.0 + unit(eng) * 99.0) * (eng() & 1 ? 1.0 : -1.0);
  }
  switch (kind) {
    case FloatKind::kF16: return double_to_f16_bits(v);
    case FloatKind::kF32: return f32_bits(float(v));
    default: return f64_bits(v);
  }
}

std::vector<uint8_t> layer_bytes(const SynthLayer& layer, uint64_t seed,
                                 const SynthModel& spec) {
  std::mt19937_64 eng(seed);
  Dtype d = dtype_for(layer.dtype);
  unsigned w = d.element_width();
  std::vector<uint8_t> out(size_t(layer.params) * w);

  if (d.is_float()) {
    FloatKind kind = d.float_kind();
    // Geometric repeat distances via inversion.
    double mean = spec.dup_distance_mean < 1 ? 1 : spec.dup_distance_mean;
    double log1mp = std::log1p(-1.0 / mean);  // mean >= 1 so p in (0, 1]
    for (uint64_t i = 0; i < layer.params; ++i) {
      uint64_t pat;
      if (i > 0 && unit(eng) < spec.dup_ratio) {
        uint64_t dist;
        if (mean <= 1.0) {
          dist = 1;
        } else {
          double u = unit(eng);
          dist = 1 + uint64_t(std::log1p(-u) / log1mp);
        }
        if (dist > i) dist = i;
        if (dist == 0) dist = 1;
        std::memcpy(&pat, out.data() + (i - dist) * w, w);
      } else {
        pat = fresh_pattern(eng, spec, kind);
      }
      std::memcpy(out.data() + i * w, &pat, w);
    }
  } else {
    for (size_t i = 0; i < out.size(); i += 8) {
      uint64_t v = eng();
      if (layer.dtype == DtypeTag::kBool) v &= 0x0101010101010101ull;
      size_t n = std::min<size_t>(8, out.size() - i);
      std::memcpy(out.data() + i, &v, n);
    }
  }
  return out;
}

}  // namespace

LoadedModel synth_model(const SynthModel& spec) {
  LoadedModel m;
  m.manifest.model_id = spec.id;
  uint64_t off = 0;
  for (uint32_t i = 0; i < spec.layers.size(); ++i) {
    const SynthLayer& layer = spec.layers[i];
    TensorMeta t;
    t.dtype = dtype_for(layer.dtype);
    t.name = layer.name.empty()
                 ? "layer_" + std::to_string(i) + "." + t.dtype.str
                 : layer.name;
    t.shape = {layer.params};
    t.data_offset = off;
    t.data_len = layer.params * t.dtype.element_width();
    off += t.data_len;

    uint64_t seed = layer.seed ? layer.seed : mix(spec.seed, i);
    auto bytes = layer_bytes(layer, seed, spec);
    m.data.insert(m.data.end(), bytes.begin(), bytes.end());
    m.manifest.tensors.push_back(std::move(t));
  }
  m.manifest.payload_bytes = off;
  return m;
}

std::vector<LoadedModel> synth_corpus(const std::vector<SynthModel>& specs) {
  std::vector<LoadedModel> out;
  for (const SynthModel& spec : specs) {
    LoadedModel base = synth_model(spec);
    if (spec.copies <= 1) {
      out.push_back(std::move(base));
      continue;
    }
    for (unsigned c = 0; c < spec.copies; ++c) {
      LoadedModel copy = base;
      copy.manifest.model_id = spec.id + "_" + std::to_string(c);
      out.push_back(std::move(copy));
    }
  }
  return out;
}

void write_synth_corpus(const std::vector<SynthModel>& specs,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const SynthModel& spec : specs) {
    LoadedModel base = synth_model(spec);
    if (spec.copies <= 1) {
      write_model(base, dir / (base.manifest.model_id + ".safetensors"));
      continue;
    }
    for (unsigned c = 0; c < spec.copies; ++c) {
      base.manifest.model_id = spec.id + "_" + std::to_string(c);
      write_model(base, dir / (base.manifest.model_id + ".safetensors"));
    }
  }
}

std::vector<SynthModel> parse_synth_spec(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("synth spec: invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("models") || !j["models"].is_array())
    throw ParseError("synth spec: expected an object with a 'models' array");

  std::vector<SynthModel> specs;
  for (const auto& mj : j["models"]) {
    SynthModel spec;
    spec.id = mj.value("id", "model_" + std::to_string(specs.size()));
    spec.seed = mj.value("seed", uint64_t(1));
    spec.in_range_fraction = mj.value("in_range_fraction", 0.99);
    spec.dup_ratio = mj.value("dup_ratio", 0.0);
    spec.dup_distance_mean = mj.value("dup_distance_mean", 256.0);
    spec.special_fraction = mj.value("special_fraction", 0.0);
    spec.copies = mj.value("copies", 1u);
    if (!mj.contains("layers") || !mj["layers"].is_array() || mj["layers"].empty())
      throw ParseError("synth spec: model '" + spec.id + "' needs a 'layers' array");
    for (const auto& lj : mj["layers"]) {
      SynthLayer layer;
      layer.name = lj.value("name", std::string());
      layer.params = lj.value("params", uint64_t(0));
      layer.seed = lj.value("seed", uint64_t(0));
      std::string ds = lj.value("dtype", "F32");
      if (ds == "F16") layer.dtype = DtypeTag::kF16;
      else if (ds == "F32") layer.dtype = DtypeTag::kF32;
      else if (ds == "F64") layer.dtype = DtypeTag::kF64;
      else if (ds == "U8") layer.dtype = DtypeTag::kU8;
      else if (ds == "I64") layer.dtype = DtypeTag::kI64;
      else if (ds == "BOOL") layer.dtype = DtypeTag::kBool;
      else throw ParseError("synth spec: unknown dtype '" + ds + "'");
      if (layer.params == 0)
        throw ParseError("synth spec: layer in model '" + spec.id + "' needs params > 0");
      spec.layers.push_back(std::move(layer));
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

}  // namespace elves
