#pragma once

#include <cstdint>
#include <vector>

namespace fasvit {

enum class ColorSpace { kSrgbUnit, kNormalized };

// H x W x 3 row-major float image. Values live in [0, 1] while the tag is
// kSrgbUnit; after per-channel normalization the tag flips to kNormalized
// and values are unbounded.
struct ImageTensor {
  int height = 0;
  int width = 0;
  ColorSpace color_space = ColorSpace::kSrgbUnit;
  std::vector<float> data;  // size height * width * 3

  ImageTensor() = default;
  ImageTensor(int h, int w, float fill = 0.0f, ColorSpace cs = ColorSpace::kSrgbUnit);

  float& at(int y, int x, int c) { return data[static_cast<size_t>(y * width + x) * 3 + c]; }
  float at(int y, int x, int c) const { return data[static_cast<size_t>(y * width + x) * 3 + c]; }

  bool same_shape(const ImageTensor& o) const {
    return height == o.height && width == o.width;
  }
  size_t pixel_count() const { return static_cast<size_t>(height) * width; }
};

// Bilinear resampling with half-pixel centers; output clamped to [0, 1].
// Resizing to the source size reproduces the input bit-exactly.
ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w);

// Per-channel zero-mean unit-variance normalization over this image's own
// pixels (population statistics). Channels with std below 1e-8 are shifted
// but not scaled. Requires a kSrgbUnit input; output is kNormalized.
ImageTensor normalize_per_channel(const ImageTensor& img);

// Same transform against externally supplied statistics (e.g. dataset-wide).
ImageTensor normalize_with_stats(const ImageTensor& img, const double mean[3],
                                 const double stddev[3]);

// Round to the 8-bit grid (the PNG/PPM quantization step) without leaving
// float space; useful for hashing augmentation outputs.
std::vector<std::uint8_t> quantize_u8(const ImageTensor& img);
ImageTensor from_u8(int h, int w, const std::uint8_t* rgb);

// Content hash of the 8-bit quantization; stable id for golden-image tests.
std::uint64_t pixel_hash(const ImageTensor& img);

inline float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

}  // namespace fasvit
