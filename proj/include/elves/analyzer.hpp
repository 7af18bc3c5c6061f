#pragma once

#include <span>
#include <string>
#include <vector>

#include "elves/chunk.hpp"
#include "elves/model.hpp"

namespace elves {

// ---- parameter value distribution --------------------------------------

struct ValueHistogram {
  uint64_t total = 0;        // float parameters examined
  uint64_t neg1_to_zero = 0; // value in (-1, 0]
  uint64_t zero_to_one = 0;  // value in (0, 1)
  uint64_t out_of_range = 0; // |value| >= 1, or not finite
  uint64_t nan_count = 0;    // subset of out_of_range
  uint64_t inf_count = 0;    // subset of out_of_range

  uint64_t in_range() const { return neg1_to_zero + zero_to_one; }
  double in_range_fraction() const { return total ? double(in_range()) / double(total) : 0.0; }
};

ValueHistogram param_value_histogram(const LoadedModel& m);
void accumulate_histogram(ValueHistogram& h, std::span<const uint8_t> data, FloatKind kind);

// Fraction of float parameters whose bit pattern already occurred earlier in
// the model's per-dtype flattened stream.
double param_duplication_ratio(const LoadedModel& m);

// ---- duplication / similarity tables -----------------------------------

struct DupRow {
  std::string dtype;  // "F32", ..., or "all"
  uint64_t units = 0;
  uint64_t dup_units = 0;
  uint64_t bytes = 0;
  uint64_t dup_bytes = 0;

  double dup_unit_fraction() const { return units ? double(dup_units) / double(units) : 0.0; }
  double dup_byte_fraction() const { return bytes ? double(dup_bytes) / double(bytes) : 0.0; }
};

struct DupReport {
  std::vector<DupRow> rows;  // per dtype, sorted by dtype string
  DupRow total;
};

// A unit is duplicated when its fingerprint matched an earlier unit anywhere
// in the corpus (scan order: model, tensor, chunk).
DupReport layer_dup_report(std::span<const LoadedModel> models, unsigned workers = 1);
DupReport chunk_dup_report_fsc(std::span<const LoadedModel> models, size_t chunk_size,
                               unsigned workers = 1);
DupReport chunk_dup_report_cdc(std::span<const LoadedModel> models, const CdcConfig& cfg = {},
                               unsigned workers = 1);
// Same accounting with the sampled similarity signature instead of the full
// digest. granularity 0 = whole layers, otherwise fixed-size chunks of that
// many bytes. Float layers sample on parameter boundaries, byte chunks on
// byte boundaries.
DupReport similarity_report(std::span<const LoadedModel> models, size_t granularity,
                            unsigned stride = 32, unsigned workers = 1);

// ---- restore verification ----------------------------------------------

struct LayerErrorRow {
  std::string tensor;
  std::string dtype;
  uint64_t elements = 0;
  uint64_t mismatched = 0;  // non-float: differing elements; float: bound violations
  double max_abs_err = 0;   // float layers only
  double mean_abs_err = 0;
  bool bit_exact = true;
  bool ok = true;  // within the dtype's error bound (non-float: bit equality)
};

struct ErrorReport {
  std::string model_id;
  std::vector<LayerErrorRow> rows;
  bool all_ok = true;
  double max_abs_err = 0;
};

// Compares two models tensor-by-tensor (matched by name). Float elements must
// agree within the dtype's error bound; everything else must be bit-exact.
// NaN/Inf elements count as matching only when their patterns are identical.
ErrorReport error_report(const LoadedModel& original, const LoadedModel& restored);

// ---- serialization of reports ------------------------------------------

std::string dup_report_csv(const DupReport& r);
std::string dup_report_json(const DupReport& r);
std::string histogram_csv(const ValueHistogram& h);
std::string histogram_json(const ValueHistogram& h);
std::string error_report_csv(const ErrorReport& r);
std::string error_report_json(const ErrorReport& r);

}  // namespace elves
