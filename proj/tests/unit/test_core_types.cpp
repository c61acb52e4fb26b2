#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "sitar/core_types.hpp"
#include "sitar/errors.hpp"

using namespace sitar;

namespace {

DatasetManifest make_manifest(int num_videos, int num_classes) {
  DatasetManifest m;
  m.num_classes = num_classes;
  for (int i = 0; i < num_videos; ++i) {
    ManifestRecord rec;
    rec.video.id = "v" + std::to_string(i);
    rec.video.path = "/data/v" + std::to_string(i);
    rec.video.frame_count = 16;
    rec.label = i % num_classes;
    m.records.push_back(rec);
  }
  return m;
}

}  // namespace

TEST_CASE("validate_manifest accepts a well-formed manifest") {
  CHECK(validate_manifest(make_manifest(10, 5)).empty());
}

TEST_CASE("validate_manifest flags out-of-range labels") {
  auto m = make_manifest(5, 4);
  m.records[3].label = 4;  // == C
  const auto violations = validate_manifest(m);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0] == "label out of range @record 3");
}

TEST_CASE("validate_manifest flags duplicate ids") {
  auto m = make_manifest(8, 4);
  m.records[5].video.id = "v7";
  const auto violations = validate_manifest(m);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0] == "duplicate id 'v7'");
}

TEST_CASE("validate_manifest flags bad frame counts and unlabeled sentinel passes") {
  auto m = make_manifest(3, 3);
  m.records[1].video.frame_count = 0;
  m.records[2].label = kUnlabeled;
  const auto violations = validate_manifest(m);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0] == "frame_count < 1 @record 1");
}

TEST_CASE("split_dataset balanced takes floor(fraction*count) min 1 per class") {
  const auto m = make_manifest(100, 10);  // 10 per class
  const auto [labeled, unlabeled] = split_dataset(m, {.labeled_fraction = 0.1, .seed = 7});
  CHECK(labeled.records.size() == 10);
  CHECK(unlabeled.records.size() == 90);
  std::set<int> classes;
  for (const auto& rec : labeled.records) classes.insert(rec.label);
  CHECK(classes.size() == 10);
  for (const auto& rec : unlabeled.records) CHECK(rec.label == kUnlabeled);
}

TEST_CASE("split_dataset fraction 1.0 leaves nothing unlabeled") {
  const auto m = make_manifest(12, 4);
  const auto [labeled, unlabeled] = split_dataset(m, {.labeled_fraction = 1.0, .seed = 1});
  CHECK(labeled.records.size() == 12);
  CHECK(unlabeled.records.empty());
}

TEST_CASE("split_dataset is a deterministic partition") {
  const auto m = make_manifest(60, 6);
  const SplitSpec spec{.labeled_fraction = 0.25, .seed = 42};
  const auto [l1, u1] = split_dataset(m, spec);
  const auto [l2, u2] = split_dataset(m, spec);
  REQUIRE(l1.records.size() == l2.records.size());
  for (size_t i = 0; i < l1.records.size(); ++i)
    CHECK(l1.records[i].video.id == l2.records[i].video.id);

  // Partition: every input id appears in exactly one split.
  std::set<std::string> seen;
  for (const auto& rec : l1.records) seen.insert(rec.video.id);
  for (const auto& rec : u1.records) CHECK(seen.insert(rec.video.id).second);
  CHECK(seen.size() == m.records.size());
}

TEST_CASE("split_dataset errors when a class cannot receive a labeled sample") {
  DatasetManifest m = make_manifest(6, 3);
  m.num_classes = 4;  // class 3 has zero videos
  CHECK_THROWS_WITH_AS(split_dataset(m, {.labeled_fraction = 0.5, .seed = 0}),
                       doctest::Contains("class 3"), DataError);
}

TEST_CASE("split_dataset rejects unlabeled input") {
  auto m = make_manifest(4, 2);
  m.records[2].label = kUnlabeled;
  CHECK_THROWS_AS(split_dataset(m, {.labeled_fraction = 0.5, .seed = 0}), DataError);
}

TEST_CASE("manifest JSONL round-trip is byte-identical") {
  const auto dir = std::filesystem::temp_directory_path() / "sitar_core_types_test";
  std::filesystem::create_directories(dir);
  auto m = make_manifest(9, 3);
  m.class_names = {"a", "b", "c"};
  m.records[4].label = kUnlabeled;

  const auto p1 = (dir / "m1.jsonl").string();
  const auto p2 = (dir / "m2.jsonl").string();
  save_manifest(m, p1);
  const auto loaded = load_manifest(p1);
  CHECK(loaded.num_classes == 3);
  CHECK(loaded.class_names == m.class_names);
  REQUIRE(loaded.records.size() == m.records.size());
  CHECK(loaded.records[4].label == kUnlabeled);
  CHECK(loaded.records[8].video.frame_count == 16);
  save_manifest(loaded, p2);

  std::ifstream f1(p1), f2(p2);
  const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("load_manifest rejects files without a header") {
  const auto dir = std::filesystem::temp_directory_path() / "sitar_core_types_test2";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "bad.jsonl").string();
  std::ofstream(path) << R"({"id":"x","path":"p","frames":3,"label":0})" << "\n";
  CHECK_THROWS_AS(load_manifest(path), DataError);
  std::filesystem::remove_all(dir);
}
