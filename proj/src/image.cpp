#include "sitar/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "sitar/errors.hpp"

namespace sitar {

Image resize_bilinear(const Image& src, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bilinear: output size must be positive");
  if (src.height == out_h && src.width == out_w) return src;

  Image dst(out_h, out_w);
  const double sy = static_cast<double>(src.height) / out_h;
  const double sx = static_cast<double>(src.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
    const int y0 = std::min(static_cast<int>(fy), src.height - 1);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const float wy = static_cast<float>(fy - y0);
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
      const int x0 = std::min(static_cast<int>(fx), src.width - 1);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const float wx = static_cast<float>(fx - x0);
      for (int c = 0; c < 3; ++c) {
        const float top = src.at(y0, x0, c) * (1.0f - wx) + src.at(y0, x1, c) * wx;
        const float bot = src.at(y1, x0, c) * (1.0f - wx) + src.at(y1, x1, c) * wx;
        dst.at(y, x, c) = top * (1.0f - wy) + bot * wy;
      }
    }
  }
  return dst;
}

Image crop(const Image& src, int y0, int x0, int h, int w) {
  if (h < 1 || w < 1 || y0 < 0 || x0 < 0 || y0 + h > src.height || x0 + w > src.width)
    throw std::invalid_argument("crop: rectangle out of bounds");
  Image dst(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) dst.at(y, x, c) = src.at(y0 + y, x0 + x, c);
  return dst;
}

void normalize_inplace(Image& img) {
  for (float& v : img.px) v = v * 2.0f - 1.0f;
}

namespace {

Image from_mat(const cv::Mat& bgr, const std::string& what) {
  if (bgr.empty()) throw DataError("failed to decode image: " + what);
  cv::Mat bgr8;
  if (bgr.type() != CV_8UC3) {
    if (bgr.channels() == 1) {
      cv::Mat tmp;
      cv::merge(std::vector<cv::Mat>{bgr, bgr, bgr}, tmp);
      tmp.convertTo(bgr8, CV_8UC3);
    } else {
      bgr.convertTo(bgr8, CV_8UC3);
    }
  } else {
    bgr8 = bgr;
  }
  Image img(bgr8.rows, bgr8.cols);
  for (int y = 0; y < bgr8.rows; ++y) {
    const cv::Vec3b* row = bgr8.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr8.cols; ++x) {
      img.at(y, x, 0) = row[x][2] / 255.0f;
      img.at(y, x, 1) = row[x][1] / 255.0f;
      img.at(y, x, 2) = row[x][0] / 255.0f;
    }
  }
  return img;
}

cv::Mat to_mat(const Image& img) {
  cv::Mat bgr(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      const auto q = [&](int c) {
        const float v = std::clamp(img.at(y, x, c), 0.0f, 1.0f);
        return static_cast<std::uint8_t>(std::lround(v * 255.0f));
      };
      row[x] = cv::Vec3b(q(2), q(1), q(0));
    }
  }
  return bgr;
}

}  // namespace

Image decode_png_rgb(const std::vector<std::uint8_t>& bytes) {
  const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8U, const_cast<std::uint8_t*>(bytes.data()));
  return from_mat(cv::imdecode(raw, cv::IMREAD_COLOR), "<memory>");
}

Image load_png_rgb(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw DataError("cannot read image file: " + path);
  return from_mat(bgr, path);
}

std::vector<std::uint8_t> encode_png_rgb(const Image& img) {
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", to_mat(img), out)) throw DataError("PNG encoding failed");
  return out;
}

void save_png_rgb(const Image& img, const std::string& path) {
  if (!cv::imwrite(path, to_mat(img))) throw DataError("cannot write image file: " + path);
}

}  // namespace sitar
