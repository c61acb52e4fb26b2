#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "sitar/core_types.hpp"
#include "sitar/image.hpp"
#include "sitar/rng.hpp"

namespace sitar::sampling {

enum class SampleMode { kRandomInSegment, kCenterOfSegment };

struct FrameSequence {
  std::string video_id;
  std::vector<int> indices;  // provenance: source frame index per entry
  std::vector<Image> frames;
};

// TSN-style sampling: the timeline is divided into M consecutive
// non-overlapping segments and one index is taken per segment. When
// total_frames < M the conceptual segments are shorter than one frame and
// indices repeat. CENTER picks floor of the segment midpoint.
std::vector<int> segment_indices(int total_frames, int num_samples, SampleMode mode, Rng& rng);

// Decoded-frame cache keyed by video id; frames are stored as 8-bit RGB.
// Loading through the cache is what makes repeated epochs over the same
// dataset affordable.
class FrameCache {
 public:
  explicit FrameCache(std::size_t max_bytes = 2ULL << 30) : max_bytes_(max_bytes) {}

  FrameSequence load(const VideoRef& video, const std::vector<int>& indices);
  std::size_t size_bytes() const { return bytes_; }

 private:
  struct CachedVideo {
    int height = 0, width = 0;
    std::vector<std::vector<std::uint8_t>> frames;  // per frame, h*w*3
  };

  std::shared_ptr<const CachedVideo> fetch(const VideoRef& video);

  std::size_t max_bytes_;
  std::size_t bytes_ = 0;
  std::unordered_map<std::string, std::shared_ptr<const CachedVideo>> videos_;
  std::mutex mu_;
};

// Uncached load; frames are decoded as RGB in index order.
FrameSequence load_frames(const VideoRef& video, const std::vector<int>& indices);

// Test instrumentation: counts segment_indices calls per requested M.
std::uint64_t segment_call_count(int num_samples);
void reset_segment_call_counts();

}  // namespace sitar::sampling
