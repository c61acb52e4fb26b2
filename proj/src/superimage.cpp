#include "sitar/superimage.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sitar/errors.hpp"

namespace sitar::superimage {

GridDims grid_dims(int num_frames) {
  if (num_frames < 1) throw std::invalid_argument("grid_dims: num_frames must be >= 1");
  int m = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(num_frames))));
  while (m * m < num_frames) ++m;  // guard against sqrt rounding
  while ((m - 1) * (m - 1) >= num_frames) --m;
  return {m, m * m - num_frames};
}

sampling::FrameSequence apply_order(sampling::FrameSequence frames, FrameOrder order, Rng& rng) {
  if (frames.frames.empty()) throw std::invalid_argument("apply_order: empty sequence");
  const size_t n = frames.frames.size();
  std::vector<size_t> perm(n);
  std::iota(perm.begin(), perm.end(), size_t{0});
  switch (order) {
    case FrameOrder::kNormal:
      return frames;
    case FrameOrder::kReverse:
      std::reverse(perm.begin(), perm.end());
      break;
    case FrameOrder::kRandom:
      rng.shuffle(perm.begin(), perm.end());
      break;
  }
  sampling::FrameSequence out;
  out.video_id = std::move(frames.video_id);
  out.indices.reserve(n);
  out.frames.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    out.indices.push_back(frames.indices.empty() ? 0 : frames.indices[perm[i]]);
    out.frames.push_back(std::move(frames.frames[perm[i]]));
  }
  return out;
}

SuperImage compose(const sampling::FrameSequence& frames, int frame_side, float pad_value,
                   FrameOrder order_tag) {
  if (frames.frames.empty()) throw std::invalid_argument("compose: empty sequence");
  if (frame_side < 1) throw std::invalid_argument("compose: frame_side must be >= 1");
  for (size_t i = 1; i < frames.frames.size(); ++i)
    if (!frames.frames[i].same_size(frames.frames[0]))
      throw std::invalid_argument("compose: mixed frame sizes");

  const auto [m, pad_count] = grid_dims(static_cast<int>(frames.frames.size()));
  SuperImage si;
  si.grid_side = m;
  si.pad_count = pad_count;
  si.order = order_tag;
  si.frame_side = frame_side;
  si.image = Image(m * frame_side, m * frame_side, pad_value);

  for (size_t k = 0; k < frames.frames.size(); ++k) {
    const Image cell = resize_bilinear(frames.frames[k], frame_side, frame_side);
    const int row = static_cast<int>(k) / m;
    const int col = static_cast<int>(k) % m;
    for (int y = 0; y < frame_side; ++y)
      for (int x = 0; x < frame_side; ++x)
        for (int c = 0; c < 3; ++c)
          si.image.at(row * frame_side + y, col * frame_side + x, c) = cell.at(y, x, c);
  }
  return si;
}

Image extract_cell(const SuperImage& si, int cell_index) {
  const int cells = si.grid_side * si.grid_side;
  if (cell_index < 0 || cell_index >= cells)
    throw std::invalid_argument("extract_cell: index out of range");
  const int row = cell_index / si.grid_side;
  const int col = cell_index % si.grid_side;
  return crop(si.image, row * si.frame_side, col * si.frame_side, si.frame_side, si.frame_side);
}

namespace {

int frame_side_for(int side, int num_frames) {
  const int m = grid_dims(num_frames).side;
  if (side % m != 0)
    throw ConfigError("super-image side " + std::to_string(side) + " is not divisible by grid side " +
                      std::to_string(m));
  return side / m;
}

SuperImage build_view(const VideoRef& video, int num_frames, const PairConfig& cfg, Rng& rng,
                      sampling::FrameCache* cache, const ClipTransform& transform) {
  const auto indices = sampling::segment_indices(video.frame_count, num_frames, cfg.mode, rng);
  sampling::FrameSequence seq =
      cache ? cache->load(video, indices) : sampling::load_frames(video, indices);
  if (transform) seq = transform(std::move(seq), rng);
  seq = apply_order(std::move(seq), cfg.order, rng);
  return compose(seq, frame_side_for(cfg.side, num_frames), cfg.pad_value, cfg.order);
}

}  // namespace

std::pair<SuperImage, SuperImage> super_image_pair(const VideoRef& video, const PairConfig& cfg,
                                                   Rng& rng, sampling::FrameCache* cache,
                                                   const ClipTransform& transform) {
  if (cfg.frames_slow >= cfg.frames_fast)
    throw ConfigError("super_image_pair: slow view must use fewer frames than fast view");
  SuperImage fast = build_view(video, cfg.frames_fast, cfg, rng, cache, transform);
  SuperImage slow = build_view(video, cfg.frames_slow, cfg, rng, cache, transform);
  return {std::move(fast), std::move(slow)};
}

SuperImage super_image_single(const VideoRef& video, int num_frames, const PairConfig& cfg,
                              Rng& rng, sampling::FrameCache* cache, const ClipTransform& transform) {
  return build_view(video, num_frames, cfg, rng, cache, transform);
}

}  // namespace sitar::superimage
