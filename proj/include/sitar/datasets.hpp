#pragma once

#include <cstdint>
#include <string>

#include "sitar/core_types.hpp"

namespace sitar::datasets {

// Moving-shape videos whose class is the direction of travel. Speed, start
// position, shape, size and color are per-video nuisance factors, so the
// label is invariant to playback rate by construction.
struct SyntheticSpec {
  int num_classes = 8;  // 8 compass directions, or 4 cardinal ones
  int videos_per_class = 10;
  int frames_per_video = 16;
  int resolution = 64;
  double size_lo = 10.0;  // shape diameter range in pixels
  double size_hi = 18.0;
  double color_lo = 0.6;  // per-channel RGB range of the shape
  double color_hi = 1.0;
  double speed_jitter_lo = 0.5;  // multiplicative range around base_speed
  double speed_jitter_hi = 2.0;
  double base_speed = 1.4;  // pixels per frame at jitter 1
  double noise_std = 0.03;
  std::uint64_t seed = 0;

  void validate() const;
};

// Class index -> short compass name ("e", "ne", ...).
std::vector<std::string> direction_names(int num_classes);

// Unit direction of travel in image coordinates (y grows downward).
std::pair<double, double> direction_vector(int num_classes, int class_index);

// Writes <out_dir>/<video_id>/00000.png ... plus labels.txt, and returns the
// (fully labeled) manifest. Byte-identical for a fixed seed.
DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir);

// Scans <root>/<video_id>/*.png directories; labels_file maps video ids to
// class names (two whitespace-separated columns). Frame numbering must be
// contiguous from zero.
DatasetManifest ingest_frame_dirs(const std::string& root, const std::string& labels_file);

}  // namespace sitar::datasets
