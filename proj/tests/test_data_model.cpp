#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "testutil.hpp"
#include "vtd/checkpoint.hpp"
#include "vtd/manifest.hpp"

using namespace vtd;

namespace {

Manifest sample_manifest() {
  Manifest m;
  m.split_seed = 7;
  VideoRecord real{"data/videos/real_0001.mp4", Label::REAL, "", Split::TRAIN, 24, {}};
  VideoRecord fake{"data/videos/drift_0001.mp4", Label::FAKE, "drift", Split::TEST, 24, {}};
  VideoRecord degraded{"out/crf_2/drift_0001__crf_2.mp4", Label::FAKE, "drift",
                       Split::TEST, 24, DegradationSpec{DegradeOp::H265_CRF, 2}};
  m.records = {real, fake, degraded};
  return m;
}

}  // namespace

TEST_CASE("manifest serialization round-trips field for field") {
  Rng rng(42);
  for (int trial = 0; trial < 25; ++trial) {
    Manifest m;
    m.split_seed = rng.next_u64();
    const int n = 1 + static_cast<int>(rng.uniform_int(20));
    for (int i = 0; i < n; ++i) {
      VideoRecord r;
      r.path = "v" + std::to_string(i) + "_" + std::to_string(rng.next_u64() % 100) + ".mp4";
      r.label = rng.uniform() < 0.5 ? Label::REAL : Label::FAKE;
      r.generator_tag = r.label == Label::FAKE ? "gen" + std::to_string(rng.uniform_int(3)) : "";
      r.split = static_cast<Split>(rng.uniform_int(3));
      r.frame_count = 1 + static_cast<int64_t>(rng.uniform_int(100));
      if (rng.uniform() < 0.3) {
        r.degradation.operation = static_cast<DegradeOp>(1 + rng.uniform_int(3));
        r.degradation.severity = 1 + static_cast<int>(rng.uniform_int(3));
      }
      m.records.push_back(std::move(r));
    }
    const Manifest back = parse_manifest(serialize_manifest(m));
    CHECK(back == m);
  }
}

TEST_CASE("manifest file format is frozen by golden file") {
  const std::string got = serialize_manifest(sample_manifest());
  const std::string golden_path = std::string(TEST_DATA_DIR) + "/manifest_golden.jsonl";
  std::ifstream is(golden_path, std::ios::binary);
  REQUIRE(is.good());
  std::string want((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  CHECK(got == want);
}

TEST_CASE("validate_manifest accepts a fully valid manifest") {
  CHECK(validate_manifest(sample_manifest()).empty());
}

TEST_CASE("validate_manifest flags a REAL record with a generator tag") {
  Manifest m = sample_manifest();
  m.records[0].generator_tag = "potat1";
  const auto v = validate_manifest(m);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("record 0") != std::string::npos);
  CHECK(v[0].find("potat1") != std::string::npos);
}

TEST_CASE("validate_manifest flags ratios that do not sum to 1") {
  Manifest m = sample_manifest();
  m.split_ratio = {0.8, 0.1, 0.2};
  const auto v = validate_manifest(m);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("sum") != std::string::npos);
}

TEST_CASE("validate_manifest flags FAKE without tag, bad counts, duplicate ids") {
  Manifest m = sample_manifest();
  m.records[1].generator_tag = "";
  m.records[0].frame_count = 0;
  VideoRecord dup = m.records[2];
  m.records.push_back(dup);
  const auto v = validate_manifest(m);
  CHECK(v.size() == 3);
}

TEST_CASE("frame invariants") {
  Rng rng(1);
  Frame ok = vtdtest::make_frame(8, 8, 0, rng);
  CHECK(ok.violation().empty());

  Frame small = vtdtest::make_frame(4, 8, 0, rng);
  CHECK(!small.violation().empty());

  Frame oob = vtdtest::make_frame(8, 8, 0, rng);
  oob.pixels.data[3] = 1.5;
  CHECK(!oob.violation().empty());

  Frame nan = vtdtest::make_frame(8, 8, 0, rng);
  nan.pixels.data[0] = std::nan("");
  CHECK(!nan.violation().empty());
}

TEST_CASE("clip invariants: length, consecutive timestamps, single source") {
  Rng rng(2);
  Clip c = vtdtest::make_random_clip(kDefaultClipLength, 8, 8, rng);
  CHECK(c.violation().empty());

  Clip short_clip = vtdtest::make_random_clip(5, 8, 8, rng);
  CHECK(!short_clip.violation().empty());

  Clip gap = vtdtest::make_random_clip(kDefaultClipLength, 8, 8, rng);
  gap.frames[3].timestamp_index = 99;
  CHECK(!gap.violation().empty());
}

TEST_CASE("degradation spec severity iff operation") {
  CHECK(DegradationSpec{}.valid());
  CHECK(DegradationSpec{DegradeOp::BIT_ERROR, 2}.valid());
  CHECK(!DegradationSpec{DegradeOp::BIT_ERROR, 0}.valid());
  CHECK(!DegradationSpec{DegradeOp::NONE, 1}.valid());
  CHECK(!DegradationSpec{DegradeOp::H265_CRF, 4}.valid());
}

TEST_CASE("checkpoint container round-trips tensors and metadata") {
  vtdtest::TempDir dir("ckpt");
  Rng rng(3);
  Checkpoint ck;
  ck.meta["version"] = 1;
  ck.meta["kind"] = "test";
  ck.add("alpha", vtdtest::random_tensor({3, 4}, rng));
  ck.add("beta.gamma", vtdtest::random_tensor({2, 2, 5}, rng));
  const std::string path = dir.file("x.vtc");
  ck.save(path);

  const Checkpoint back = Checkpoint::load(path);
  CHECK(back.meta.at("kind") == "test");
  CHECK(back.tensors_bitwise_equal(ck));
  CHECK(back.get("alpha").shape() == std::vector<int64_t>{3, 4});
}

TEST_CASE("checkpoint rejects a meta block without version") {
  Checkpoint ck;
  ck.meta["kind"] = "test";
  vtdtest::TempDir dir("ckpt2");
  CHECK_THROWS_AS(ck.save(dir.file("x.vtc")), Error);
}

TEST_CASE("checkpoint load rejects corrupt files") {
  vtdtest::TempDir dir("ckpt3");
  const std::string path = dir.file("bad.vtc");
  std::ofstream(path, std::ios::binary) << "not a checkpoint";
  CHECK_THROWS_AS(Checkpoint::load(path), Error);
}
