#pragma once

// Deterministic fixture definitions, shared by the unit tests and by the
// golden_gen tool that writes the committed fixture files. Everything here
// must stay bit-for-bit reproducible: no RNG, no floating-point environment
// dependence.

#include <vector>

#include "elves/archive.hpp"
#include "elves/de.hpp"
#include "test_util.hpp"

namespace elves_test {

// One million parameters of one repeated value bracketed by a pair of equal
// values a million positions apart, so the final repeat needs a 20-bit
// distance field.
inline std::vector<uint32_t> million_distance_patterns() {
  const uint32_t head = 0x3F000000;    // 0.5f
  const uint32_t filler = 0x3E000000;  // 0.125f
  std::vector<uint32_t> p(1000001, filler);
  p[0] = head;
  p[1000000] = head;
  return p;
}

// A corpus that exercises every per-layer coding method: an exponent-coded
// model, a duplicate-coded model, an incompressible model, and a pair of
// models sharing one layer.
inline std::vector<elves::LoadedModel> tiny_corpus() {
  std::vector<elves::LoadedModel> models;

  // Distinct values inside (-1, 1): exponent coding wins.
  std::vector<float> w(96);
  for (size_t i = 0; i < w.size(); ++i)
    w[i] = (i % 2 ? -1.0f : 1.0f) * (0.001f * float(i + 1));
  std::vector<uint16_t> h(40);
  for (size_t i = 0; i < h.size(); ++i) h[i] = uint16_t(0x3000 + 17 * i);  // in (0, 1)
  std::vector<uint8_t> shared(32);
  for (size_t i = 0; i < shared.size(); ++i) shared[i] = uint8_t(i * 5 + 1);
  models.push_back(make_model(
      "tiny0", {f32_tensor("w", w), f16_tensor("h", h), u8_tensor("shared", shared),
                i64_tensor("steps", {100, 200, 300}), bf16_tensor("bf", {1, 2, 3, 4})}));

  // A small pool of repeating out-of-range values: duplicate coding wins.
  const float pool[4] = {1.5f, 2.5f, 3.5f, 4.5f};
  std::vector<float> d(48);
  for (size_t i = 0; i < d.size(); ++i) d[i] = pool[(i * 7) % 4];
  models.push_back(make_model("tiny1", {f32_tensor("d", d), u8_tensor("z", {9, 9, 9})}));

  // Unique out-of-range values: neither coder helps, the layer stays raw.
  std::vector<float> r(16);
  for (size_t i = 0; i < r.size(); ++i) r[i] = 10.0f + float(i) * 1.25f;
  models.push_back(make_model("tiny2", {f32_tensor("noise", r)}));

  // Shares one layer with tiny0 and adds its own exponent-codable weights.
  std::vector<float> w2(64);
  for (size_t i = 0; i < w2.size(); ++i) w2[i] = 0.5f - 0.007f * float(i);
  models.push_back(make_model("tiny3", {u8_tensor("shared", shared), f32_tensor("w2", w2)}));

  return models;
}

// Options for the committed archive fixture: no final stage, so the bytes do
// not depend on the zlib build.
inline elves::CompressOptions tiny_corpus_options() {
  elves::CompressOptions opt;
  opt.stage_final = false;
  opt.workers = 2;
  return opt;
}

}  // namespace elves_test
