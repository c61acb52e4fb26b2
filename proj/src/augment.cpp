#include "sitar/augment.hpp"

#include <algorithm>
#include <cmath>

namespace sitar::augment {

sampling::FrameSequence random_resized_crop_clip(sampling::FrameSequence clip, int out_side,
                                                 const CropParams& params, Rng& rng) {
  if (clip.frames.empty()) throw std::invalid_argument("random_resized_crop_clip: empty clip");
  const int src_h = clip.frames[0].height;
  const int src_w = clip.frames[0].width;

  int crop_h = 0, crop_w = 0, y0 = 0, x0 = 0;
  bool found = false;
  for (int attempt = 0; attempt < 10 && !found; ++attempt) {
    const double area = rng.uniform(params.scale_lo, params.scale_hi) *
                        static_cast<double>(src_h) * src_w;
    const double ratio = std::exp(rng.uniform(std::log(params.ratio_lo), std::log(params.ratio_hi)));
    const int w = static_cast<int>(std::lround(std::sqrt(area * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(area / ratio)));
    if (w < 1 || h < 1 || w > src_w || h > src_h) continue;
    crop_w = w;
    crop_h = h;
    y0 = rng.uniform_int(0, src_h - h);
    x0 = rng.uniform_int(0, src_w - w);
    found = true;
  }
  if (!found) {
    crop_h = crop_w = std::min(src_h, src_w);
    y0 = (src_h - crop_h) / 2;
    x0 = (src_w - crop_w) / 2;
  }

  for (auto& frame : clip.frames)
    frame = resize_bilinear(crop(frame, y0, x0, crop_h, crop_w), out_side, out_side);
  return clip;
}

void mixup(std::vector<Image>& pixels, nn::Mat<float>& label_dists, float lambda) {
  const int b = static_cast<int>(pixels.size());
  if (b == 0 || label_dists.rows() != b)
    throw std::invalid_argument("mixup: batch and labels must align");
  if (lambda == 1.0f) return;

  const std::vector<Image> src = pixels;
  const nn::Mat<float> src_labels = label_dists;
  for (int i = 0; i < b; ++i) {
    const Image& partner = src[b - 1 - i];
    Image& dst = pixels[i];
    for (size_t k = 0; k < dst.px.size(); ++k)
      dst.px[k] = lambda * src[i].px[k] + (1.0f - lambda) * partner.px[k];
    label_dists.row(i) = lambda * src_labels.row(i) + (1.0f - lambda) * src_labels.row(b - 1 - i);
  }
}

void cutmix(std::vector<Image>& pixels, nn::Mat<float>& label_dists, float lambda, Rng& rng) {
  const int b = static_cast<int>(pixels.size());
  if (b == 0 || label_dists.rows() != b)
    throw std::invalid_argument("cutmix: batch and labels must align");
  const int h = pixels[0].height;
  const int w = pixels[0].width;

  const double cut = std::sqrt(std::clamp(1.0 - static_cast<double>(lambda), 0.0, 1.0));
  const int rh = static_cast<int>(std::lround(h * cut));
  const int rw = static_cast<int>(std::lround(w * cut));
  if (rh == 0 || rw == 0) return;
  const int y0 = rng.uniform_int(0, h - rh);
  const int x0 = rng.uniform_int(0, w - rw);
  const float realized = static_cast<float>(rh) * rw / (static_cast<float>(h) * w);

  const std::vector<Image> src = pixels;
  const nn::Mat<float> src_labels = label_dists;
  for (int i = 0; i < b; ++i) {
    const Image& partner = src[b - 1 - i];
    Image& dst = pixels[i];
    for (int y = y0; y < y0 + rh; ++y)
      for (int x = x0; x < x0 + rw; ++x)
        for (int c = 0; c < 3; ++c) dst.at(y, x, c) = partner.at(y, x, c);
    label_dists.row(i) =
        (1.0f - realized) * src_labels.row(i) + realized * src_labels.row(b - 1 - i);
  }
}

}  // namespace sitar::augment
