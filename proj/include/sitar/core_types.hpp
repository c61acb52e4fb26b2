#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace sitar {

// Records without a label carry this sentinel in memory and on disk.
inline constexpr int kUnlabeled = -1;

struct VideoRef {
  std::string id;
  std::string path;     // directory holding frames 00000.png .. NNNNN.png
  int frame_count = 0;  // >= 1
};

struct ManifestRecord {
  VideoRef video;
  int label = kUnlabeled;  // in [0, num_classes) or kUnlabeled
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  int num_classes = 0;
  std::vector<std::string> class_names;  // optional, size num_classes when present
};

struct SplitSpec {
  double labeled_fraction = 0.1;  // in (0, 1]
  std::uint64_t seed = 0;
  bool per_class_balanced = true;
};

// Returns one message per violated invariant; empty means well-formed.
std::vector<std::string> validate_manifest(const DatasetManifest& manifest);

// Deterministically partitions a fully labeled manifest into a labeled part
// and an unlabeled part (labels replaced by the sentinel). Balanced mode
// takes floor(fraction * count) per class, at least 1.
std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          const SplitSpec& spec);

// JSON Lines: a header line {"num_classes": C[, "class_names": [...]]}
// followed by one record per line with keys {"id", "path", "frames", "label"}.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

}  // namespace sitar
