#include "sitar/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sitar/errors.hpp"
#include "sitar/image.hpp"
#include "sitar/rng.hpp"

namespace sitar::datasets {

namespace fs = std::filesystem;

void SyntheticSpec::validate() const {
  if (num_classes != 4 && num_classes != 8)
    throw ConfigError("SyntheticSpec: num_classes must be 4 or 8");
  if (videos_per_class < 1 || frames_per_video < 1 || resolution < 8)
    throw ConfigError("SyntheticSpec: counts and resolution must be positive");
  if (size_lo <= 0 || size_hi < size_lo) throw ConfigError("SyntheticSpec: bad size range");
  if (color_lo < 0 || color_hi > 1 || color_hi < color_lo)
    throw ConfigError("SyntheticSpec: bad color range");
  if (speed_jitter_lo <= 0 || speed_jitter_hi < speed_jitter_lo)
    throw ConfigError("SyntheticSpec: bad speed_jitter range");
  if (noise_std < 0) throw ConfigError("SyntheticSpec: noise_std must be >= 0");
}

std::vector<std::string> direction_names(int num_classes) {
  static const std::vector<std::string> kAll = {"e", "ne", "n", "nw", "w", "sw", "s", "se"};
  if (num_classes == 8) return kAll;
  if (num_classes == 4) return {"e", "n", "w", "s"};
  throw ConfigError("direction_names: num_classes must be 4 or 8");
}

std::pair<double, double> direction_vector(int num_classes, int class_index) {
  if (class_index < 0 || class_index >= num_classes)
    throw std::invalid_argument("direction_vector: class out of range");
  const int step = num_classes == 4 ? 2 : 1;
  const double angle = 2.0 * M_PI * (class_index * step) / 8.0;
  // Screen coordinates: +x right, +y down; "north" moves up.
  return {std::cos(angle), -std::sin(angle)};
}

namespace {

struct ShapeParams {
  bool disc = true;
  double half = 6.0;
  float color[3] = {1.0f, 1.0f, 1.0f};
};

// Pixel coverage of the shape at center (cx, cy) with ~1px soft edge.
double coverage(const ShapeParams& s, double cx, double cy, int x, int y) {
  if (s.disc) {
    const double dx = x + 0.5 - cx;
    const double dy = y + 0.5 - cy;
    const double dist = std::sqrt(dx * dx + dy * dy);
    return std::clamp(s.half + 0.5 - dist, 0.0, 1.0);
  }
  const double ox = std::clamp(std::min<double>(x + 1, cx + s.half) - std::max<double>(x, cx - s.half), 0.0, 1.0);
  const double oy = std::clamp(std::min<double>(y + 1, cy + s.half) - std::max<double>(y, cy - s.half), 0.0, 1.0);
  return ox * oy;
}

}  // namespace

DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir) {
  spec.validate();
  fs::create_directories(out_dir);

  const auto names = direction_names(spec.num_classes);
  DatasetManifest manifest;
  manifest.num_classes = spec.num_classes;
  manifest.class_names = names;

  std::ofstream labels_out(fs::path(out_dir) / "labels.txt");
  if (!labels_out) throw DataError("cannot write labels file under " + out_dir);

  const int res = spec.resolution;
  const int total = spec.num_classes * spec.videos_per_class;
  for (int v = 0; v < total; ++v) {
    const int cls = v / spec.videos_per_class;
    const int k = v % spec.videos_per_class;
    char idbuf[64];
    std::snprintf(idbuf, sizeof(idbuf), "%s_%04d", names[cls].c_str(), k);
    const std::string id = idbuf;
    const fs::path video_dir = fs::path(out_dir) / id;
    fs::create_directories(video_dir);

    Rng rng = Rng::substream(spec.seed, 0x73796e7468ULL ^ static_cast<std::uint64_t>(v));

    ShapeParams shape;
    shape.disc = rng.uniform() < 0.5;
    shape.half = rng.uniform(spec.size_lo, spec.size_hi) / 2.0;
    for (float& c : shape.color) c = static_cast<float>(rng.uniform(spec.color_lo, spec.color_hi));

    const auto [dx, dy] = direction_vector(spec.num_classes, cls);
    double speed = spec.base_speed * rng.uniform(spec.speed_jitter_lo, spec.speed_jitter_hi);
    const double margin = shape.half + 2.0;
    const double usable = res - 1.0 - 2.0 * margin;
    if (usable <= 0) throw ConfigError("generate_synthetic: shapes too large for the resolution");
    // Keep the whole trajectory inside the frame.
    const double travel = speed * (spec.frames_per_video - 1);
    const double max_travel =
        std::min(std::abs(dx) > 1e-12 ? usable / std::abs(dx) : 1e9,
                 std::abs(dy) > 1e-12 ? usable / std::abs(dy) : 1e9);
    if (travel > max_travel) speed *= max_travel / travel;
    const double reach_x = std::abs(dx) * speed * (spec.frames_per_video - 1);
    const double reach_y = std::abs(dy) * speed * (spec.frames_per_video - 1);
    const double sx = rng.uniform(margin + (dx < 0 ? reach_x : 0.0),
                                  res - 1.0 - margin - (dx > 0 ? reach_x : 0.0));
    const double sy = rng.uniform(margin + (dy < 0 ? reach_y : 0.0),
                                  res - 1.0 - margin - (dy > 0 ? reach_y : 0.0));

    for (int f = 0; f < spec.frames_per_video; ++f) {
      const double cx = sx + dx * speed * f;
      const double cy = sy + dy * speed * f;
      Image frame(res, res, 0.0f);
      for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
          const double cov = coverage(shape, cx, cy, x, y);
          for (int c = 0; c < 3; ++c) {
            double value = cov * shape.color[c];
            if (spec.noise_std > 0) value += rng.normal(0.0, spec.noise_std);
            frame.at(y, x, c) = static_cast<float>(std::clamp(value, 0.0, 1.0));
          }
        }
      char fname[16];
      std::snprintf(fname, sizeof(fname), "%05d.png", f);
      save_png_rgb(frame, (video_dir / fname).string());
    }

    ManifestRecord rec;
    rec.video.id = id;
    rec.video.path = video_dir.string();
    rec.video.frame_count = spec.frames_per_video;
    rec.label = cls;
    manifest.records.push_back(std::move(rec));
    labels_out << id << " " << names[cls] << "\n";
  }
  if (!labels_out) throw DataError("labels file write failed under " + out_dir);
  return manifest;
}

DatasetManifest ingest_frame_dirs(const std::string& root, const std::string& labels_file) {
  std::ifstream labels_in(labels_file);
  if (!labels_in) throw DataError("cannot open labels file: " + labels_file);
  std::map<std::string, std::string> label_of;
  std::string line;
  while (std::getline(labels_in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string id, cls;
    if (!(ss >> id >> cls)) throw DataError("labels file: malformed line '" + line + "'");
    label_of[id] = cls;
  }

  std::set<std::string> class_set;
  for (const auto& [id, cls] : label_of) class_set.insert(cls);
  std::vector<std::string> class_names(class_set.begin(), class_set.end());
  std::map<std::string, int> class_index;
  for (size_t i = 0; i < class_names.size(); ++i) class_index[class_names[i]] = static_cast<int>(i);

  std::vector<std::string> violations;
  DatasetManifest manifest;
  manifest.num_classes = static_cast<int>(class_names.size());
  manifest.class_names = class_names;

  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());

  for (const auto& dir : dirs) {
    const std::string id = dir.filename().string();
    const auto it = label_of.find(id);
    if (it == label_of.end()) {
      violations.push_back("video '" + id + "' missing from labels file");
      continue;
    }
    int png_count = 0;
    for (const auto& f : fs::directory_iterator(dir))
      if (f.path().extension() == ".png") ++png_count;
    int contiguous = 0;
    for (;; ++contiguous) {
      char fname[16];
      std::snprintf(fname, sizeof(fname), "%05d.png", contiguous);
      if (!fs::exists(dir / fname)) break;
    }
    if (contiguous == 0) {
      violations.push_back("video '" + id + "' has no frame 00000.png");
      continue;
    }
    if (contiguous != png_count) {
      violations.push_back("video '" + id + "' frames not contiguous: " +
                           std::to_string(png_count) + " files, " + std::to_string(contiguous) +
                           " contiguous from 0");
      continue;
    }
    ManifestRecord rec;
    rec.video.id = id;
    rec.video.path = dir.string();
    rec.video.frame_count = contiguous;
    rec.label = class_index[it->second];
    manifest.records.push_back(std::move(rec));
  }

  if (!violations.empty()) {
    std::string msg = "ingest_frame_dirs found problems:";
    for (const auto& v : violations) msg += "\n  - " + v;
    throw DataError(msg);
  }
  return manifest;
}

}  // namespace sitar::datasets
