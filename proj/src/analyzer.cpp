#include "elves/analyzer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <set>

#include "elves/fp.hpp"
#include "elves/thread.hpp"

namespace elves {

void accumulate_histogram(ValueHistogram& h, std::span<const uint8_t> data, FloatKind kind) {
  unsigned w = float_kind_width(kind);
  size_t n = data.size() / w;
  for (size_t i = 0; i < n; ++i) {
    double v;
    if (kind == FloatKind::kF16) {
      uint16_t b;
      std::memcpy(&b, data.data() + i * 2, 2);
      v = f16_bits_to_double(b);
    } else if (kind == FloatKind::kF32) {
      float f;
      std::memcpy(&f, data.data() + i * 4, 4);
      v = f;
    } else {
      std::memcpy(&v, data.data() + i * 8, 8);
    }
    ++h.total;
    if (std::isnan(v)) {
      ++h.nan_count;
      ++h.out_of_range;
    } else if (std::isinf(v)) {
      ++h.inf_count;
      ++h.out_of_range;
    } else if (v > -1.0 && v <= 0.0) {
      ++h.neg1_to_zero;
    } else if (v > 0.0 && v < 1.0) {
      ++h.zero_to_one;
    } else {
      ++h.out_of_range;
    }
  }
}

ValueHistogram param_value_histogram(const LoadedModel& m) {
  ValueHistogram h;
  for (uint32_t i = 0; i < m.manifest.tensors.size(); ++i) {
    const TensorMeta& t = m.manifest.tensors[i];
    if (t.dtype.is_float()) accumulate_histogram(h, m.layer_bytes(i), t.dtype.float_kind());
  }
  return h;
}

double param_duplication_ratio(const LoadedModel& m) {
  // Repeats of an earlier pattern = count minus distinct patterns.
  uint64_t total = 0, dups = 0;
  for (const FloatStream& s : flatten_float_layers(m)) {
    unsigned w = float_kind_width(s.kind);
    std::vector<uint64_t> pats(size_t(s.param_count));
    for (uint64_t i = 0; i < s.param_count; ++i)
      std::memcpy(&pats[size_t(i)], s.data.data() + i * w, w);
    std::sort(pats.begin(), pats.end());
    uint64_t distinct = std::unique(pats.begin(), pats.end()) - pats.begin();
    total += s.param_count;
    dups += s.param_count - distinct;
  }
  return total ? double(dups) / double(total) : 0.0;
}

// ---- duplication tables -------------------------------------------------

namespace {

struct Unit {
  std::string dtype;
  uint64_t bytes;
  Digest256 digest;
};

DupReport tally(const std::vector<Unit>& units) {
  DupReport rep;
  std::map<std::string, DupRow> rows;
  std::set<Digest256> seen;
  for (const Unit& u : units) {
    DupRow& r = rows.try_emplace(u.dtype, DupRow{u.dtype, 0, 0, 0, 0}).first->second;
    bool dup = !seen.insert(u.digest).second;
    ++r.units;
    r.bytes += u.bytes;
    rep.total.units += 1;
    rep.total.bytes += u.bytes;
    if (dup) {
      ++r.dup_units;
      r.dup_bytes += u.bytes;
      ++rep.total.dup_units;
      rep.total.dup_bytes += u.bytes;
    }
  }
  rep.total.dtype = "all";
  for (auto& [k, v] : rows) rep.rows.push_back(std::move(v));
  return rep;
}

// Builds (dtype, bytes, digest) units layer-parallel, preserving scan order.
template <class Fn>
std::vector<Unit> per_layer_units(std::span<const LoadedModel> models, unsigned workers,
                                  const Fn& fn) {
  std::vector<std::pair<uint32_t, uint32_t>> tasks;
  for (uint32_t m = 0; m < models.size(); ++m)
    for (uint32_t t = 0; t < models[m].manifest.tensors.size(); ++t) tasks.push_back({m, t});
  std::vector<std::vector<Unit>> per_task(tasks.size());
  parallel_for(tasks.size(), workers, [&](size_t i) {
    auto [m, t] = tasks[i];
    per_task[i] = fn(models[m], t);
  });
  std::vector<Unit> units;
  for (auto& v : per_task) units.insert(units.end(), std::make_move_iterator(v.begin()),
                                        std::make_move_iterator(v.end()));
  return units;
}

}  // namespace

DupReport layer_dup_report(std::span<const LoadedModel> models, unsigned workers) {
  auto units = per_layer_units(models, workers, [](const LoadedModel& m, uint32_t t) {
    const TensorMeta& tm = m.manifest.tensors[t];
    return std::vector<Unit>{{tm.dtype.str, tm.data_len, sha256(m.layer_bytes(t))}};
  });
  return tally(units);
}

DupReport chunk_dup_report_fsc(std::span<const LoadedModel> models, size_t chunk_size,
                               unsigned workers) {
  auto units = per_layer_units(models, workers, [&](const LoadedModel& m, uint32_t t) {
    const TensorMeta& tm = m.manifest.tensors[t];
    std::vector<Unit> out;
    for (const ChunkRecord& c : fsc_chunks(m.layer_bytes(t), chunk_size))
      out.push_back({tm.dtype.str, c.length, c.digest});
    return out;
  });
  return tally(units);
}

DupReport chunk_dup_report_cdc(std::span<const LoadedModel> models, const CdcConfig& cfg,
                               unsigned workers) {
  auto units = per_layer_units(models, workers, [&](const LoadedModel& m, uint32_t t) {
    const TensorMeta& tm = m.manifest.tensors[t];
    std::vector<Unit> out;
    for (const ChunkRecord& c : cdc_chunks(m.layer_bytes(t), cfg))
      out.push_back({tm.dtype.str, c.length, c.digest});
    return out;
  });
  return tally(units);
}

DupReport similarity_report(std::span<const LoadedModel> models, size_t granularity,
                            unsigned stride, unsigned workers) {
  auto units = per_layer_units(models, workers, [&](const LoadedModel& m, uint32_t t) {
    const TensorMeta& tm = m.manifest.tensors[t];
    auto bytes = m.layer_bytes(t);
    std::vector<Unit> out;
    if (granularity == 0) {
      // Whole layers: float layers sample parameters, others sample bytes.
      unsigned w = tm.dtype.is_float() ? tm.dtype.element_width() : 1;
      out.push_back({tm.dtype.str, tm.data_len, similarity_signature(bytes, w, stride)});
    } else {
      for (const ChunkRecord& c : fsc_chunks(bytes, granularity))
        out.push_back({tm.dtype.str, c.length,
                       similarity_signature(bytes.subspan(c.offset, c.length), 1, stride)});
    }
    return out;
  });
  return tally(units);
}

// ---- restore verification ----------------------------------------------

namespace {

LayerErrorRow compare_layer(const TensorMeta& meta, std::span<const uint8_t> a,
                            std::span<const uint8_t> b) {
  LayerErrorRow row;
  row.tensor = meta.name;
  row.dtype = meta.dtype.str;
  if (a.size() != b.size()) {
    row.elements = meta.element_count();
    row.mismatched = row.elements;
    row.bit_exact = false;
    row.ok = false;
    return row;
  }
  if (!meta.dtype.is_float()) {
    unsigned w = meta.dtype.element_width();
    row.elements = w ? a.size() / w : 0;
    for (size_t i = 0; w && i + w <= a.size(); i += w)
      if (std::memcmp(a.data() + i, b.data() + i, w) != 0) ++row.mismatched;
    row.bit_exact = row.mismatched == 0;
    row.ok = row.bit_exact;
    return row;
  }

  FloatKind kind = meta.dtype.float_kind();
  unsigned w = float_kind_width(kind);
  double bound = float_kind_error_bound(kind);
  row.elements = a.size() / w;
  double err_sum = 0;
  for (size_t i = 0; i < row.elements; ++i) {
    uint64_t pa = 0, pb = 0;
    std::memcpy(&pa, a.data() + i * w, w);
    std::memcpy(&pb, b.data() + i * w, w);
    if (pa == pb) continue;
    row.bit_exact = false;
    double va, vb;
    if (kind == FloatKind::kF16) {
      va = f16_bits_to_double(uint16_t(pa));
      vb = f16_bits_to_double(uint16_t(pb));
    } else if (kind == FloatKind::kF32) {
      va = f32_from_bits(uint32_t(pa));
      vb = f32_from_bits(uint32_t(pb));
    } else {
      va = f64_from_bits(pa);
      vb = f64_from_bits(pb);
    }
    if (!std::isfinite(va) || !std::isfinite(vb)) {
      // Specials must round-trip bit-exactly; a pattern change is a failure.
      ++row.mismatched;
      row.ok = false;
      continue;
    }
    double err = std::fabs(vb - va);
    err_sum += err;
    row.max_abs_err = std::max(row.max_abs_err, err);
    if (err > bound) {
      ++row.mismatched;
      row.ok = false;
    }
  }
  row.mean_abs_err = row.elements ? err_sum / double(row.elements) : 0.0;
  return row;
}

}  // namespace

ErrorReport error_report(const LoadedModel& original, const LoadedModel& restored) {
  ErrorReport rep;
  rep.model_id = original.manifest.model_id;
  std::map<std::string, uint32_t> restored_by_name;
  for (uint32_t i = 0; i < restored.manifest.tensors.size(); ++i)
    restored_by_name[restored.manifest.tensors[i].name] = i;

  for (uint32_t i = 0; i < original.manifest.tensors.size(); ++i) {
    const TensorMeta& t = original.manifest.tensors[i];
    auto it = restored_by_name.find(t.name);
    if (it == restored_by_name.end()) {
      LayerErrorRow row;
      row.tensor = t.name;
      row.dtype = t.dtype.str;
      row.elements = t.element_count();
      row.mismatched = row.elements;
      row.bit_exact = false;
      row.ok = false;
      rep.rows.push_back(std::move(row));
      rep.all_ok = false;
      continue;
    }
    LayerErrorRow row =
        compare_layer(t, original.layer_bytes(i), restored.layer_bytes(it->second));
    rep.all_ok = rep.all_ok && row.ok;
    rep.max_abs_err = std::max(rep.max_abs_err, row.max_abs_err);
    rep.rows.push_back(std::move(row));
  }
  if (restored.manifest.tensors.size() != original.manifest.tensors.size()) rep.all_ok = false;
  return rep;
}

// ---- report serialization ----------------------------------------------

std::string dup_report_csv(const DupReport& r) {
  std::string s = "dtype,units,dup_units,dup_unit_pct,bytes,dup_bytes,dup_byte_pct\n";
  auto line = [&](const DupRow& row) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%llu,%llu,%.4f,%llu,%llu,%.4f\n", row.dtype.c_str(),
                  (unsigned long long)row.units, (unsigned long long)row.dup_units,
                  100.0 * row.dup_unit_fraction(), (unsigned long long)row.bytes,
                  (unsigned long long)row.dup_bytes, 100.0 * row.dup_byte_fraction());
    s += buf;
  };
  for (const DupRow& row : r.rows) line(row);
  line(r.total);
  return s;
}

static nlohmann::json dup_row_json(const DupRow& row) {
  return {{"dtype", row.dtype},
          {"units", row.units},
          {"dup_units", row.dup_units},
          {"dup_unit_pct", 100.0 * row.dup_unit_fraction()},
          {"bytes", row.bytes},
          {"dup_bytes", row.dup_bytes},
          {"dup_byte_pct", 100.0 * row.dup_byte_fraction()}};
}

std::string dup_report_json(const DupReport& r) {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const DupRow& row : r.rows) j["rows"].push_back(dup_row_json(row));
  j["total"] = dup_row_json(r.total);
  return j.dump(2);
}

std::string histogram_csv(const ValueHistogram& h) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "total,neg1_to_zero,zero_to_one,out_of_range,nan,inf,in_range_pct\n"
                "%llu,%llu,%llu,%llu,%llu,%llu,%.4f\n",
                (unsigned long long)h.total, (unsigned long long)h.neg1_to_zero,
                (unsigned long long)h.zero_to_one, (unsigned long long)h.out_of_range,
                (unsigned long long)h.nan_count, (unsigned long long)h.inf_count,
                100.0 * h.in_range_fraction());
  return buf;
}

std::string histogram_json(const ValueHistogram& h) {
  nlohmann::json j{{"total", h.total},
                   {"neg1_to_zero", h.neg1_to_zero},
                   {"zero_to_one", h.zero_to_one},
                   {"out_of_range", h.out_of_range},
                   {"nan", h.nan_count},
                   {"inf", h.inf_count},
                   {"in_range_pct", 100.0 * h.in_range_fraction()}};
  return j.dump(2);
}

std::string error_report_csv(const ErrorReport& r) {
  std::string s = "tensor,dtype,elements,mismatched,max_abs_err,mean_abs_err,bit_exact,ok\n";
  for (const LayerErrorRow& row : r.rows) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s,%s,%llu,%llu,%.9g,%.9g,%d,%d\n", row.tensor.c_str(),
                  row.dtype.c_str(), (unsigned long long)row.elements,
                  (unsigned long long)row.mismatched, row.max_abs_err, row.mean_abs_err,
                  int(row.bit_exact), int(row.ok));
    s += buf;
  }
  return s;
}

std::string error_report_json(const ErrorReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const LayerErrorRow& row : r.rows)
    rows.push_back({{"tensor", row.tensor},
                    {"dtype", row.dtype},
                    {"elements", row.elements},
                    {"mismatched", row.mismatched},
                    {"max_abs_err", row.max_abs_err},
                    {"mean_abs_err", row.mean_abs_err},
                    {"bit_exact", row.bit_exact},
                    {"ok", row.ok}});
  nlohmann::json j{{"model_id", r.model_id},
                   {"all_ok", r.all_ok},
                   {"max_abs_err", r.max_abs_err},
                   {"rows", rows}};
  return j.dump(2);
}

}  // namespace elves
