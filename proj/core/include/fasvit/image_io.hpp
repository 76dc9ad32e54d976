#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fasvit/image.hpp"

namespace fasvit {

// 8-bit RGB PNG codec (color type 2, no interlace). Values are quantized to
// the 0..255 grid on encode; decode errors carry the byte offset at which
// the stream became invalid.
std::vector<std::uint8_t> encode_png(const ImageTensor& img);
ImageTensor decode_png(const std::uint8_t* bytes, size_t size);
ImageTensor decode_png(const std::vector<std::uint8_t>& bytes);

// Binary PPM (P6), for zero-dependency fixtures.
std::vector<std::uint8_t> encode_ppm(const ImageTensor& img);
ImageTensor decode_ppm(const std::uint8_t* bytes, size_t size);

// Dispatch on file magic (read) or extension .png/.ppm (write).
ImageTensor read_image(const std::string& path);
void write_image(const std::string& path, const ImageTensor& img);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const void* data, size_t size);
inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  write_file(path, bytes.data(), bytes.size());
}
inline std::string read_text_file(const std::string& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}
inline void write_text_file(const std::string& path, const std::string& text) {
  write_file(path, text.data(), text.size());
}

}  // namespace fasvit
