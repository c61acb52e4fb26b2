#pragma once

#include <vector>

#include "sitar/image.hpp"
#include "sitar/nn.hpp"
#include "sitar/rng.hpp"
#include "sitar/sampling.hpp"

namespace sitar::augment {

struct MixParams {
  double mixup_alpha = 0.8;
  double cutmix_alpha = 1.0;
  double switch_prob = 0.5;  // probability of picking Mixup over CutMix per batch
};

struct CropParams {
  double scale_lo = 0.6;   // area fraction range
  double scale_hi = 1.0;
  double ratio_lo = 0.75;  // aspect ratio range
  double ratio_hi = 4.0 / 3.0;
};

// One crop rectangle is sampled per clip and applied to every frame, then
// each frame is resized to out_side. Degenerate rectangles are resampled
// internally; after ten failed attempts a centered square crop is used.
sampling::FrameSequence random_resized_crop_clip(sampling::FrameSequence clip, int out_side,
                                                 const CropParams& params, Rng& rng);

// x_i' = lambda * x_i + (1 - lambda) * x_{B-1-i}; label rows mixed with the
// same lambda. The partner is the reversed batch, so no generator is needed.
void mixup(std::vector<Image>& pixels, nn::Mat<float>& label_dists, float lambda);

// Pastes one rectangle of area ratio (1 - lambda) from the reversed batch;
// the rectangle is sampled to fit entirely inside the image and labels are
// mixed by the realized (pixel-quantized) area ratio.
void cutmix(std::vector<Image>& pixels, nn::Mat<float>& label_dists, float lambda, Rng& rng);

}  // namespace sitar::augment
