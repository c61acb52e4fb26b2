#pragma once

#include <functional>
#include <utility>

#include "sitar/image.hpp"
#include "sitar/rng.hpp"
#include "sitar/sampling.hpp"

namespace sitar::superimage {

enum class FrameOrder { kNormal, kRandom, kReverse };

struct GridDims {
  int side = 0;       // m
  int pad_count = 0;  // m*m - num_frames
};

// m = ceil(sqrt(num_frames)); trailing cells are padding.
GridDims grid_dims(int num_frames);

// NORMAL is the identity, REVERSE flips, RANDOM applies a seeded permutation.
// Provenance indices follow the frames.
sampling::FrameSequence apply_order(sampling::FrameSequence frames, FrameOrder order, Rng& rng);

struct SuperImage {
  Image image;
  int grid_side = 0;
  int pad_count = 0;
  FrameOrder order = FrameOrder::kNormal;
  int frame_side = 0;
};

// Resizes every frame to frame_side x frame_side and places them row-major,
// left to right then top to bottom; remaining cells hold pad_value.
SuperImage compose(const sampling::FrameSequence& frames, int frame_side, float pad_value,
                   FrameOrder order_tag = FrameOrder::kNormal);

// Cell content in row-major cell order (for round-trip checks and tooling).
Image extract_cell(const SuperImage& si, int cell_index);

struct PairConfig {
  int frames_fast = 8;             // M
  int frames_slow = 4;             // N < M
  int side = 576;                  // total super-image side, shared by both pathways
  float pad_value = 0.0f;
  FrameOrder order = FrameOrder::kNormal;
  sampling::SampleMode mode = sampling::SampleMode::kRandomInSegment;
};

// Per-clip hook applied between loading and composition (cropping etc.).
using ClipTransform = std::function<sampling::FrameSequence(sampling::FrameSequence, Rng&)>;

// Samples the fast and slow views independently from one video and composes
// both at the shared side length. Frames are rescaled to [-1, 1] before
// composition so the default pad value of 0 is neutral.
std::pair<SuperImage, SuperImage> super_image_pair(const VideoRef& video, const PairConfig& cfg,
                                                   Rng& rng, sampling::FrameCache* cache = nullptr,
                                                   const ClipTransform& transform = nullptr);

// Single-pathway variant (phase 1 and inference use only the fast view).
SuperImage super_image_single(const VideoRef& video, int num_frames, const PairConfig& cfg,
                              Rng& rng, sampling::FrameCache* cache = nullptr,
                              const ClipTransform& transform = nullptr);

}  // namespace sitar::superimage
