#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "sitar/datasets.hpp"
#include "sitar/errors.hpp"
#include "sitar/image.hpp"
#include "sitar/sampling.hpp"

using namespace sitar;
namespace fs = std::filesystem;

namespace {

datasets::SyntheticSpec tiny_spec(std::uint64_t seed = 5) {
  datasets::SyntheticSpec spec;
  spec.num_classes = 8;
  spec.videos_per_class = 2;
  spec.frames_per_video = 12;
  spec.resolution = 48;
  spec.noise_std = 0.02;
  spec.seed = seed;
  return spec;
}

// Centroid of above-background luminance; the oracle used to confirm the
// class really is the direction of travel.
std::pair<double, double> centroid(const Image& img) {
  double wx = 0, wy = 0, wsum = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double lum = (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0;
      if (lum > 0.15) {
        wx += lum * x;
        wy += lum * y;
        wsum += lum;
      }
    }
  REQUIRE(wsum > 0);
  return {wx / wsum, wy / wsum};
}

int direction_class_from_frames(const std::vector<Image>& frames, int num_classes) {
  const auto first = centroid(frames.front());
  const auto last = centroid(frames.back());
  const double dx = last.first - first.first;
  const double dy = last.second - first.second;
  const double angle = std::atan2(-dy, dx);  // screen y points down
  const int step = num_classes == 4 ? 2 : 1;
  double best_err = 1e9;
  int best = 0;
  for (int c = 0; c < num_classes; ++c) {
    const double target = 2.0 * M_PI * (c * step) / 8.0;
    double err = std::abs(std::remainder(angle - target, 2.0 * M_PI));
    if (err < best_err) {
      best_err = err;
      best = c;
    }
  }
  return best;
}

std::vector<Image> load_all_frames(const VideoRef& video) {
  std::vector<int> idx(video.frame_count);
  for (int i = 0; i < video.frame_count; ++i) idx[i] = i;
  return sampling::load_frames(video, idx).frames;
}

}  // namespace

TEST_CASE("generate_synthetic is byte-identical for a fixed seed") {
  const auto dir = fs::temp_directory_path() / "sitar_synth_det";
  fs::remove_all(dir);
  const auto m1 = datasets::generate_synthetic(tiny_spec(), (dir / "a").string());
  const auto m2 = datasets::generate_synthetic(tiny_spec(), (dir / "b").string());
  REQUIRE(m1.records.size() == m2.records.size());

  for (const auto& rec : m1.records) {
    for (int f = 0; f < rec.video.frame_count; ++f) {
      char name[16];
      std::snprintf(name, sizeof(name), "%05d.png", f);
      std::ifstream fa(fs::path(rec.video.path) / name, std::ios::binary);
      std::ifstream fb(dir / "b" / rec.video.id / name, std::ios::binary);
      const std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
      const std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
      REQUIRE(!ba.empty());
      CHECK(ba == bb);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("synthetic classes really are motion directions (centroid oracle)") {
  const auto dir = fs::temp_directory_path() / "sitar_synth_oracle";
  fs::remove_all(dir);
  const auto manifest = datasets::generate_synthetic(tiny_spec(21), dir.string());
  CHECK(validate_manifest(manifest).empty());

  for (const auto& rec : manifest.records) {
    const auto frames = load_all_frames(rec.video);
    CHECK(direction_class_from_frames(frames, manifest.num_classes) == rec.label);

    // Class 0 is "east": centroid x strictly increases.
    if (rec.label == 0) {
      double prev = -1;
      for (const auto& frame : frames) {
        const auto [cx, cy] = centroid(frame);
        CHECK(cx > prev);
        prev = cx;
      }
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("label is invariant to frame-rate subsampling") {
  const auto dir = fs::temp_directory_path() / "sitar_synth_subsample";
  fs::remove_all(dir);
  const auto manifest = datasets::generate_synthetic(tiny_spec(33), dir.string());
  for (const auto& rec : manifest.records) {
    const auto frames = load_all_frames(rec.video);
    std::vector<Image> half;
    for (size_t i = 0; i < frames.size(); i += 2) half.push_back(frames[i]);
    CHECK(direction_class_from_frames(half, manifest.num_classes) == rec.label);
  }
  fs::remove_all(dir);
}

TEST_CASE("degenerate speed jitter gives constant per-frame displacement") {
  auto spec = tiny_spec(8);
  spec.speed_jitter_lo = spec.speed_jitter_hi = 1.0;
  spec.noise_std = 0.0;
  spec.videos_per_class = 1;
  spec.num_classes = 4;
  const auto dir = fs::temp_directory_path() / "sitar_synth_jitter";
  fs::remove_all(dir);
  const auto manifest = datasets::generate_synthetic(spec, dir.string());
  for (const auto& rec : manifest.records) {
    const auto frames = load_all_frames(rec.video);
    std::vector<double> dists;
    for (size_t f = 1; f < frames.size(); ++f) {
      const auto a = centroid(frames[f - 1]);
      const auto b = centroid(frames[f]);
      dists.push_back(std::hypot(b.first - a.first, b.second - a.second));
    }
    for (double d : dists) CHECK(d == doctest::Approx(dists[0]).epsilon(0.08));
  }
  fs::remove_all(dir);
}

TEST_CASE("ingest_frame_dirs reconstructs the generated manifest") {
  const auto dir = fs::temp_directory_path() / "sitar_synth_ingest";
  fs::remove_all(dir);
  const auto manifest = datasets::generate_synthetic(tiny_spec(13), dir.string());
  const auto ingested =
      datasets::ingest_frame_dirs(dir.string(), (dir / "labels.txt").string());
  CHECK(ingested.num_classes == manifest.num_classes);
  REQUIRE(ingested.records.size() == manifest.records.size());

  // Ids are unique in both; compare as sets with label names resolved.
  std::map<std::string, std::string> want, got;
  for (const auto& rec : manifest.records) want[rec.video.id] = manifest.class_names[rec.label];
  for (const auto& rec : ingested.records) got[rec.video.id] = ingested.class_names[rec.label];
  CHECK(want == got);
  for (const auto& rec : ingested.records) CHECK(rec.video.frame_count == 12);
  fs::remove_all(dir);
}

TEST_CASE("ingest_frame_dirs reports non-contiguous numbering per video") {
  const auto dir = fs::temp_directory_path() / "sitar_synth_gap";
  fs::remove_all(dir);
  auto spec = tiny_spec(3);
  spec.num_classes = 4;
  spec.videos_per_class = 1;
  const auto manifest = datasets::generate_synthetic(spec, dir.string());
  // Punch a hole in one video's numbering.
  const auto victim = fs::path(manifest.records[1].video.path);
  fs::remove(victim / "00003.png");
  CHECK_THROWS_WITH_AS(
      datasets::ingest_frame_dirs(dir.string(), (dir / "labels.txt").string()),
      doctest::Contains("not contiguous"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("synthetic spec validation") {
  auto spec = tiny_spec();
  spec.num_classes = 5;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = tiny_spec();
  spec.speed_jitter_hi = 0.1;  // < lo
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}
