#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sitar {

// Interleaved RGB float image. Pixel values are [0, 1] straight after
// decoding; the training pipeline rescales to [-1, 1] before composition.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> px;  // height * width * 3

  Image() = default;
  Image(int h, int w, float fill = 0.0f) : height(h), width(w), px(static_cast<size_t>(h) * w * 3, fill) {}

  float& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * width + x) * 3 + c]; }

  bool same_size(const Image& other) const { return height == other.height && width == other.width; }
};

// Bilinear resampling with half-pixel centers; exact identity when the size
// does not change.
Image resize_bilinear(const Image& src, int out_h, int out_w);

Image crop(const Image& src, int y0, int x0, int h, int w);

// Maps [0,1] to [-1,1].
void normalize_inplace(Image& img);

Image decode_png_rgb(const std::vector<std::uint8_t>& bytes);
Image load_png_rgb(const std::string& path);
std::vector<std::uint8_t> encode_png_rgb(const Image& img);
void save_png_rgb(const Image& img, const std::string& path);

}  // namespace sitar
