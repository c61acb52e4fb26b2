#include <doctest.h>

#include "sitar/augment.hpp"

using namespace sitar;
using namespace sitar::augment;

namespace {

Image gradient_frame(int side, float offset) {
  Image img(side, side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = (y * 31 + x * 7 + c) / 4096.0f + offset;
  return img;
}

sampling::FrameSequence gradient_clip(int frames, int side) {
  sampling::FrameSequence clip;
  clip.video_id = "clip";
  for (int k = 0; k < frames; ++k) {
    clip.indices.push_back(k);
    clip.frames.push_back(gradient_frame(side, k * 0.01f));
  }
  return clip;
}

}  // namespace

TEST_CASE("crop with full scale and square ratio is identity up to resize") {
  CropParams params{.scale_lo = 1.0, .scale_hi = 1.0, .ratio_lo = 1.0, .ratio_hi = 1.0};
  Rng rng(1);
  auto clip = gradient_clip(3, 16);
  const auto out = random_resized_crop_clip(clip, 16, params, rng);
  for (int k = 0; k < 3; ++k)
    for (size_t i = 0; i < out.frames[k].px.size(); ++i)
      CHECK(out.frames[k].px[i] == clip.frames[k].px[i]);
}

TEST_CASE("crop is reproducible for a fixed seed") {
  CropParams params;
  auto clip = gradient_clip(4, 32);
  Rng a(9), b(9);
  const auto out_a = random_resized_crop_clip(clip, 16, params, a);
  const auto out_b = random_resized_crop_clip(clip, 16, params, b);
  for (int k = 0; k < 4; ++k)
    for (size_t i = 0; i < out_a.frames[k].px.size(); ++i)
      CHECK(out_a.frames[k].px[i] == out_b.frames[k].px[i]);
}

TEST_CASE("all frames of a clip share the crop rectangle") {
  // Frames differ only by a constant offset; resizing is linear, so after an
  // identical crop the offset relation must survive exactly.
  CropParams params{.scale_lo = 0.3, .scale_hi = 0.9};
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto clip = gradient_clip(8, 32);
    const auto out = random_resized_crop_clip(clip, 16, params, rng);
    for (int k = 1; k < 8; ++k)
      for (size_t i = 0; i < out.frames[k].px.size(); ++i)
        CHECK(out.frames[k].px[i] - k * 0.01f ==
              doctest::Approx(out.frames[0].px[i]).epsilon(2e-4));
  }
}

TEST_CASE("mixup: lambda=1 is the identity") {
  std::vector<Image> pixels{gradient_frame(8, 0.0f), gradient_frame(8, 0.5f)};
  const auto before = pixels;
  nn::Mat<float> labels = nn::Mat<float>::Identity(2, 2);
  mixup(pixels, labels, 1.0f);
  for (int i = 0; i < 2; ++i)
    for (size_t k = 0; k < pixels[i].px.size(); ++k) CHECK(pixels[i].px[k] == before[i].px[k]);
  CHECK(labels(0, 0) == 1.0f);
}

TEST_CASE("mixup: lambda=0.5 over constant images 0 and 1 gives 0.5") {
  std::vector<Image> pixels{Image(8, 8, 0.0f), Image(8, 8, 1.0f)};
  nn::Mat<float> labels = nn::Mat<float>::Identity(2, 2);
  mixup(pixels, labels, 0.5f);
  for (const auto& img : pixels)
    for (float v : img.px) CHECK(v == doctest::Approx(0.5f));
}

TEST_CASE("mixup label mixing follows lambda") {
  std::vector<Image> pixels{Image(4, 4, 0.0f), Image(4, 4, 1.0f)};
  nn::Mat<float> labels = nn::Mat<float>::Zero(2, 3);
  labels(0, 0) = 1.0f;
  labels(1, 1) = 1.0f;
  mixup(pixels, labels, 0.7f);
  CHECK(labels(0, 0) == doctest::Approx(0.7f));
  CHECK(labels(0, 1) == doctest::Approx(0.3f));
  CHECK(labels(0, 2) == doctest::Approx(0.0f));
}

TEST_CASE("cutmix: lambda=1 identity, lambda=0 full swap") {
  Rng rng(3);
  std::vector<Image> pixels{Image(8, 8, 0.25f), Image(8, 8, 0.75f)};
  nn::Mat<float> labels = nn::Mat<float>::Identity(2, 2);
  cutmix(pixels, labels, 1.0f, rng);
  for (float v : pixels[0].px) CHECK(v == 0.25f);

  cutmix(pixels, labels, 0.0f, rng);
  for (float v : pixels[0].px) CHECK(v == 0.75f);
  for (float v : pixels[1].px) CHECK(v == 0.25f);
  CHECK(labels(0, 1) == doctest::Approx(1.0f));
  CHECK(labels(0, 0) == doctest::Approx(0.0f));
}

TEST_CASE("cutmix: realized area ratio equals the label mixing weight") {
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const float lambda = static_cast<float>(rng.uniform(0.1, 0.9));
    std::vector<Image> pixels{Image(16, 16, 0.0f), Image(16, 16, 1.0f)};
    nn::Mat<float> labels = nn::Mat<float>::Identity(2, 2);
    cutmix(pixels, labels, lambda, rng);

    int pasted = 0;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        if (pixels[0].at(y, x, 0) == 1.0f) ++pasted;
    const float realized = pasted / 256.0f;
    CHECK(labels(0, 1) == doctest::Approx(realized).epsilon(1e-6));
    // Within one pixel row/column of quantization of the requested ratio.
    CHECK(std::abs(realized - (1.0f - lambda)) <= (16 + 16 + 1) / 256.0f);
  }
}

TEST_CASE("mix outputs stay on the label simplex") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Image> pixels;
    const int b = 3;
    nn::Mat<float> labels = nn::Mat<float>::Zero(b, 4);
    for (int i = 0; i < b; ++i) {
      pixels.push_back(Image(8, 8, static_cast<float>(rng.uniform())));
      labels(i, i % 4) = 0.9f;
      labels(i, (i + 1) % 4) = 0.1f;
    }
    const float lambda = static_cast<float>(rng.uniform());
    if (trial % 2 == 0)
      mixup(pixels, labels, lambda);
    else
      cutmix(pixels, labels, lambda, rng);
    for (int i = 0; i < b; ++i) {
      CHECK(labels.row(i).sum() == doctest::Approx(1.0f).epsilon(1e-5));
      for (int c = 0; c < 4; ++c) CHECK(labels(i, c) >= -1e-7f);
    }
  }
}
