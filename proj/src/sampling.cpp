#include "sitar/sampling.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "sitar/errors.hpp"

namespace sitar::sampling {

namespace {

constexpr int kMaxTracked = 256;
std::array<std::atomic<std::uint64_t>, kMaxTracked> g_segment_calls{};

std::string frame_path(const VideoRef& video, int index) {
  char name[16];
  std::snprintf(name, sizeof(name), "%05d.png", index);
  return (std::filesystem::path(video.path) / name).string();
}

}  // namespace

std::vector<int> segment_indices(int total_frames, int num_samples, SampleMode mode, Rng& rng) {
  if (total_frames < 1) throw std::invalid_argument("segment_indices: total_frames must be >= 1");
  if (num_samples < 1) throw std::invalid_argument("segment_indices: num_samples must be >= 1");
  if (num_samples < kMaxTracked) g_segment_calls[num_samples].fetch_add(1, std::memory_order_relaxed);

  const double seg = static_cast<double>(total_frames) / num_samples;
  std::vector<int> out(num_samples);
  for (int i = 0; i < num_samples; ++i) {
    int idx;
    if (total_frames >= num_samples) {
      // Integer segment [floor(i*T/M), floor((i+1)*T/M) - 1] is nonempty here.
      const int lo = static_cast<int>(static_cast<std::int64_t>(i) * total_frames / num_samples);
      const int hi = static_cast<int>(static_cast<std::int64_t>(i + 1) * total_frames / num_samples) - 1;
      idx = mode == SampleMode::kCenterOfSegment ? lo + (hi - lo + 1) / 2 : rng.uniform_int(lo, hi);
    } else if (mode == SampleMode::kCenterOfSegment) {
      // Short video: fractional segments, floor of the segment center.
      idx = static_cast<int>((i + 0.5) * seg);
    } else {
      idx = static_cast<int>((i + rng.uniform()) * seg);
    }
    out[i] = std::min(std::max(idx, 0), total_frames - 1);
  }
  return out;
}

FrameSequence load_frames(const VideoRef& video, const std::vector<int>& indices) {
  FrameSequence seq;
  seq.video_id = video.id;
  seq.indices = indices;
  seq.frames.reserve(indices.size());
  for (int idx : indices) {
    if (idx < 0 || idx >= video.frame_count)
      throw std::invalid_argument("load_frames: index " + std::to_string(idx) +
                                  " outside [0, " + std::to_string(video.frame_count) + ")");
    const std::string path = frame_path(video, idx);
    if (!std::filesystem::exists(path)) throw DataError("missing frame file: " + path);
    seq.frames.push_back(load_png_rgb(path));
  }
  return seq;
}

std::shared_ptr<const FrameCache::CachedVideo> FrameCache::fetch(const VideoRef& video) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = videos_.find(video.id);
    if (it != videos_.end()) return it->second;
  }
  auto cached = std::make_shared<CachedVideo>();
  cached->frames.resize(video.frame_count);
  std::size_t video_bytes = 0;
  for (int f = 0; f < video.frame_count; ++f) {
    const std::string path = frame_path(video, f);
    if (!std::filesystem::exists(path)) throw DataError("missing frame file: " + path);
    const Image img = load_png_rgb(path);
    if (f == 0) {
      cached->height = img.height;
      cached->width = img.width;
    }
    auto& bytes = cached->frames[f];
    bytes.resize(img.px.size());
    for (size_t i = 0; i < img.px.size(); ++i)
      bytes[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.px[i], 0.0f, 1.0f) * 255.0f));
    video_bytes += bytes.size();
  }
  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = videos_.try_emplace(video.id, std::move(cached));
  if (inserted) {
    bytes_ += video_bytes;
    if (bytes_ > max_bytes_ && videos_.size() > 1) {
      // Keep the newest entry; shed everything else. Coarse, but epochs
      // revisit the whole set anyway.
      auto keep = it->second;
      videos_.clear();
      it = videos_.try_emplace(video.id, std::move(keep)).first;
      bytes_ = video_bytes;
    }
  }
  return it->second;
}

FrameSequence FrameCache::load(const VideoRef& video, const std::vector<int>& indices) {
  const auto cached = fetch(video);
  FrameSequence seq;
  seq.video_id = video.id;
  seq.indices = indices;
  seq.frames.reserve(indices.size());
  for (int idx : indices) {
    if (idx < 0 || idx >= video.frame_count)
      throw std::invalid_argument("FrameCache::load: index out of range");
    Image img(cached->height, cached->width);
    const auto& bytes = cached->frames[idx];
    for (size_t i = 0; i < bytes.size(); ++i) img.px[i] = bytes[i] / 255.0f;
    seq.frames.push_back(std::move(img));
  }
  return seq;
}

std::uint64_t segment_call_count(int num_samples) {
  if (num_samples < 0 || num_samples >= kMaxTracked) return 0;
  return g_segment_calls[num_samples].load(std::memory_order_relaxed);
}

void reset_segment_call_counts() {
  for (auto& counter : g_segment_calls) counter.store(0, std::memory_order_relaxed);
}

}  // namespace sitar::sampling
