#include <doctest.h>

#include <random>
#include <vector>

#include "elves/dedup.hpp"
#include "test_util.hpp"

using namespace elves;
using namespace elves_test;

TEST_CASE("fingerprints are plain SHA-256") {
  CHECK(hex_digest(fingerprint_layer({})) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const uint8_t abc[] = {'a', 'b', 'c'};
  CHECK(hex_digest(fingerprint_layer({abc, 3})) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

namespace {

std::vector<LoadedModel> corpus() {
  std::vector<uint8_t> x(256), y(300), z(256), w(64);
  for (size_t i = 0; i < x.size(); ++i) x[i] = uint8_t(i);
  for (size_t i = 0; i < y.size(); ++i) y[i] = uint8_t(i * 3 + 1);
  for (size_t i = 0; i < z.size(); ++i) z[i] = uint8_t(i ^ 0x5A);
  for (size_t i = 0; i < w.size(); ++i) w[i] = uint8_t(200 - i);
  std::vector<LoadedModel> models;
  models.push_back(make_model("m0", {u8_tensor("a", x), u8_tensor("b", y)}));
  models.push_back(make_model("m1", {u8_tensor("c", x), u8_tensor("d", z)}));
  // "f" repeats x under a different dtype: dedup is content-addressed.
  TensorSpec f = f32_tensor("f", {});
  f.bytes = x;
  models.push_back(make_model("m2", {u8_tensor("e", y), f, u8_tensor("g", w)}));
  return models;
}

}  // namespace

TEST_CASE("scan collapses equal layers onto the first occurrence") {
  auto models = corpus();
  DedupIndex idx = dedup_scan(models);

  using Loc = std::pair<uint32_t, uint32_t>;
  REQUIRE(idx.stored_digests.size() == 4);  // x, y, z, w
  CHECK((idx.first_location[0] == Loc{0, 0}));
  CHECK((idx.first_location[1] == Loc{0, 1}));
  CHECK((idx.first_location[2] == Loc{1, 1}));
  CHECK((idx.first_location[3] == Loc{2, 2}));
  CHECK((idx.occurrence_count == std::vector<uint32_t>{3, 2, 1, 1}));
  CHECK(idx.is_duplicated(0));
  CHECK(idx.is_duplicated(1));
  CHECK_FALSE(idx.is_duplicated(2));
  CHECK_FALSE(idx.is_duplicated(3));

  REQUIRE(idx.models.size() == 3);
  CHECK(idx.models[0][0].is_unique);
  CHECK(idx.models[0][1].is_unique);
  CHECK_FALSE(idx.models[1][0].is_unique);
  CHECK(idx.models[1][0].stored_id == 0);
  CHECK(idx.models[1][1].is_unique);
  CHECK_FALSE(idx.models[2][0].is_unique);
  CHECK(idx.models[2][0].stored_id == 1);
  CHECK_FALSE(idx.models[2][1].is_unique);  // the F32-typed copy of x
  CHECK(idx.models[2][1].stored_id == 0);
  CHECK(idx.models[2][2].is_unique);
  CHECK(idx.models[2][2].stored_id == 3);

  CHECK(idx.stored_digests[0] == fingerprint_layer(models[0].layer_bytes(0)));
}

TEST_CASE("empty layers deduplicate too") {
  auto m0 = make_model("m0", {u8_tensor("empty1", {}), u8_tensor("data", {1, 2, 3})});
  auto m1 = make_model("m1", {u8_tensor("empty2", {})});
  std::vector<LoadedModel> models = {m0, m1};
  DedupIndex idx = dedup_scan(models);
  CHECK(idx.stored_digests.size() == 2);
  CHECK_FALSE(idx.models[1][0].is_unique);
  CHECK(idx.models[1][0].stored_id == idx.models[0][0].stored_id);
}

TEST_CASE("paranoid mode accepts a clean corpus") {
  auto models = corpus();
  DedupIndex plain = dedup_scan(models, false);
  DedupIndex checked = dedup_scan(models, true);
  CHECK(checked.stored_digests == plain.stored_digests);
  CHECK(checked.occurrence_count == plain.occurrence_count);
}

TEST_CASE("result is independent of the worker count") {
  std::mt19937_64 eng(61);
  std::vector<LoadedModel> models;
  std::vector<std::vector<uint8_t>> pool(6);
  for (auto& p : pool) {
    p.resize(64 + eng() % 512);
    for (auto& b : p) b = uint8_t(eng());
  }
  for (int m = 0; m < 5; ++m) {
    std::vector<TensorSpec> specs;
    for (int t = 0; t < 7; ++t)
      specs.push_back(u8_tensor("t" + std::to_string(t), pool[eng() % pool.size()]));
    models.push_back(make_model("m" + std::to_string(m), specs));
  }

  DedupIndex ref = dedup_scan(models, false, 1);
  for (unsigned workers : {2u, 3u, 8u}) {
    CAPTURE(workers);
    DedupIndex idx = dedup_scan(models, false, workers);
    CHECK(idx.stored_digests == ref.stored_digests);
    CHECK(idx.first_location == ref.first_location);
    CHECK(idx.occurrence_count == ref.occurrence_count);
    REQUIRE(idx.models.size() == ref.models.size());
    for (size_t m = 0; m < ref.models.size(); ++m)
      for (size_t t = 0; t < ref.models[m].size(); ++t) {
        CHECK(idx.models[m][t].is_unique == ref.models[m][t].is_unique);
        CHECK(idx.models[m][t].stored_id == ref.models[m][t].stored_id);
      }
  }
}

TEST_CASE("models without tensors and empty corpora") {
  std::vector<LoadedModel> none;
  DedupIndex idx = dedup_scan(none);
  CHECK(idx.stored_digests.empty());
  CHECK(idx.models.empty());

  std::vector<LoadedModel> bare = {make_model("empty", {})};
  DedupIndex idx2 = dedup_scan(bare);
  CHECK(idx2.stored_digests.empty());
  REQUIRE(idx2.models.size() == 1);
  CHECK(idx2.models[0].empty());
}
