#include "fasvit/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fasvit/common.hpp"

namespace fasvit {

ImageTensor::ImageTensor(int h, int w, float fill, ColorSpace cs)
    : height(h), width(w), color_space(cs) {
  if (h <= 0 || w <= 0) throw std::invalid_argument("ImageTensor: dimensions must be positive");
  data.assign(static_cast<size_t>(h) * w * 3, fill);
}

ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0)
    throw std::invalid_argument("resize_bilinear: target dimensions must be positive");
  if (out_h == img.height && out_w == img.width) return img;

  ImageTensor out(out_h, out_w, 0.0f, img.color_space);
  const double sy = static_cast<double>(img.height) / out_h;
  const double sx = static_cast<double>(img.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
        const double bot = (1.0 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
        double v = (1.0 - wy) * top + wy * bot;
        if (img.color_space == ColorSpace::kSrgbUnit) v = std::clamp(v, 0.0, 1.0);
        out.at(y, x, c) = static_cast<float>(v);
      }
    }
  }
  return out;
}

namespace {

void channel_stats(const ImageTensor& img, double mean[3], double stddev[3]) {
  const size_t n = img.pixel_count();
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += img.data[i * 3 + c];
    mean[c] = sum / static_cast<double>(n);
    double sq = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double d = img.data[i * 3 + c] - mean[c];
      sq += d * d;
    }
    stddev[c] = std::sqrt(sq / static_cast<double>(n));
  }
}

}  // namespace

ImageTensor normalize_with_stats(const ImageTensor& img, const double mean[3],
                                 const double stddev[3]) {
  ImageTensor out = img;
  out.color_space = ColorSpace::kNormalized;
  const size_t n = img.pixel_count();
  for (int c = 0; c < 3; ++c) {
    const double div = stddev[c] < 1e-8 ? 1.0 : stddev[c];
    for (size_t i = 0; i < n; ++i)
      out.data[i * 3 + c] = static_cast<float>((img.data[i * 3 + c] - mean[c]) / div);
  }
  return out;
}

ImageTensor normalize_per_channel(const ImageTensor& img) {
  if (img.color_space != ColorSpace::kSrgbUnit)
    throw std::invalid_argument("normalize_per_channel: input must be in unit sRGB space");
  double mean[3], stddev[3];
  channel_stats(img, mean, stddev);
  return normalize_with_stats(img, mean, stddev);
}

std::vector<std::uint8_t> quantize_u8(const ImageTensor& img) {
  std::vector<std::uint8_t> out(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) {
    const float v = clamp01(img.data[i]);
    out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

ImageTensor from_u8(int h, int w, const std::uint8_t* rgb) {
  ImageTensor img(h, w);
  for (size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = static_cast<float>(rgb[i]) / 255.0f;
  return img;
}

std::uint64_t pixel_hash(const ImageTensor& img) {
  const auto q = quantize_u8(img);
  std::uint64_t h = fnv1a64(&img.height, sizeof img.height);
  h = fnv1a64(&img.width, sizeof img.width, h);
  return fnv1a64(q.data(), q.size(), h);
}

}  // namespace fasvit
