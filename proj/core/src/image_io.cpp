#include "fasvit/image_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "fasvit/common.hpp"

namespace fasvit {

namespace {

const std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::uint8_t* data, size_t n) {
  put_u32be(out, static_cast<std::uint32_t>(n));
  const size_t type_pos = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data, data + n);
  const auto crc = crc32(0L, out.data() + type_pos, static_cast<uInt>(4 + n));
  put_u32be(out, static_cast<std::uint32_t>(crc));
}

struct Reader {
  const std::uint8_t* p;
  size_t size;
  size_t pos = 0;

  void need(size_t n, const char* what) const {
    if (pos + n > size)
      throw IoError(std::string("PNG: truncated while reading ") + what,
                    static_cast<long long>(pos));
  }
  std::uint32_t u32be(const char* what) {
    need(4, what);
    std::uint32_t v = (std::uint32_t(p[pos]) << 24) | (std::uint32_t(p[pos + 1]) << 16) |
                      (std::uint32_t(p[pos + 2]) << 8) | std::uint32_t(p[pos + 3]);
    pos += 4;
    return v;
  }
};

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ImageTensor& img) {
  const auto rgb = quantize_u8(img);
  const int w = img.width, h = img.height;

  // Scanlines with a leading None filter byte each.
  std::vector<std::uint8_t> raw(static_cast<size_t>(h) * (static_cast<size_t>(w) * 3 + 1));
  for (int y = 0; y < h; ++y) {
    std::uint8_t* row = raw.data() + static_cast<size_t>(y) * (w * 3 + 1);
    row[0] = 0;
    std::memcpy(row + 1, rgb.data() + static_cast<size_t>(y) * w * 3, static_cast<size_t>(w) * 3);
  }

  uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> comp(comp_size);
  if (compress2(comp.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("PNG: zlib compression failed");
  comp.resize(comp_size);

  std::vector<std::uint8_t> out(kPngSignature, kPngSignature + 8);
  std::uint8_t ihdr[13];
  ihdr[0] = static_cast<std::uint8_t>(w >> 24);
  ihdr[1] = static_cast<std::uint8_t>(w >> 16);
  ihdr[2] = static_cast<std::uint8_t>(w >> 8);
  ihdr[3] = static_cast<std::uint8_t>(w);
  ihdr[4] = static_cast<std::uint8_t>(h >> 24);
  ihdr[5] = static_cast<std::uint8_t>(h >> 16);
  ihdr[6] = static_cast<std::uint8_t>(h >> 8);
  ihdr[7] = static_cast<std::uint8_t>(h);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // color type: truecolor RGB
  ihdr[10] = 0;  // compression
  ihdr[11] = 0;  // filter method
  ihdr[12] = 0;  // no interlace
  put_chunk(out, "IHDR", ihdr, sizeof ihdr);
  put_chunk(out, "IDAT", comp.data(), comp.size());
  put_chunk(out, "IEND", nullptr, 0);
  return out;
}

ImageTensor decode_png(const std::uint8_t* bytes, size_t size) {
  Reader r{bytes, size};
  r.need(8, "signature");
  if (std::memcmp(bytes, kPngSignature, 8) != 0) throw IoError("PNG: bad signature", 0);
  r.pos = 8;

  int w = 0, h = 0;
  bool have_ihdr = false, have_iend = false;
  std::vector<std::uint8_t> idat;

  while (!have_iend) {
    const size_t chunk_start = r.pos;
    const std::uint32_t len = r.u32be("chunk length");
    r.need(4, "chunk type");
    char type[5] = {0};
    std::memcpy(type, bytes + r.pos, 4);
    r.pos += 4;
    r.need(len, "chunk data");
    const std::uint8_t* data = bytes + r.pos;
    r.pos += len;
    const std::uint32_t stored_crc = r.u32be("chunk crc");
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, bytes + chunk_start + 4, static_cast<uInt>(4 + len)));
    if (crc != stored_crc)
      throw IoError(std::string("PNG: CRC mismatch in chunk ") + type,
                    static_cast<long long>(chunk_start));

    if (std::strcmp(type, "IHDR") == 0) {
      if (len != 13) throw IoError("PNG: bad IHDR length", static_cast<long long>(chunk_start));
      w = (data[0] << 24) | (data[1] << 16) | (data[2] << 8) | data[3];
      h = (data[4] << 24) | (data[5] << 16) | (data[6] << 8) | data[7];
      if (w <= 0 || h <= 0)
        throw IoError("PNG: bad dimensions", static_cast<long long>(chunk_start));
      if (data[8] != 8 || data[9] != 2)
        throw IoError("PNG: only 8-bit RGB (color type 2) is supported",
                      static_cast<long long>(chunk_start));
      if (data[12] != 0)
        throw IoError("PNG: interlaced streams are not supported",
                      static_cast<long long>(chunk_start));
      have_ihdr = true;
    } else if (std::strcmp(type, "IDAT") == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::strcmp(type, "IEND") == 0) {
      have_iend = true;
    }
    // Ancillary chunks are skipped.
  }
  if (!have_ihdr) throw IoError("PNG: missing IHDR", 8);

  const size_t stride = static_cast<size_t>(w) * 3 + 1;
  std::vector<std::uint8_t> raw(static_cast<size_t>(h) * stride);
  uLongf raw_size = static_cast<uLongf>(raw.size());
  const int zrc = uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size()));
  if (zrc != Z_OK || raw_size != raw.size())
    throw IoError("PNG: corrupt or truncated pixel data", static_cast<long long>(size));

  // Undo per-row filters in place.
  std::vector<std::uint8_t> rgb(static_cast<size_t>(h) * w * 3);
  const int bpp = 3;
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = raw.data() + static_cast<size_t>(y) * stride;
    const std::uint8_t filter = row[0];
    std::uint8_t* cur = rgb.data() + static_cast<size_t>(y) * w * 3;
    const std::uint8_t* up = y > 0 ? cur - static_cast<size_t>(w) * 3 : nullptr;
    for (int i = 0; i < w * 3; ++i) {
      const int left = i >= bpp ? cur[i - bpp] : 0;
      const int above = up ? up[i] : 0;
      const int upleft = (up && i >= bpp) ? up[i - bpp] : 0;
      int v = row[1 + i];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += above; break;
        case 3: v += (left + above) / 2; break;
        case 4: v += paeth(left, above, upleft); break;
        default:
          throw IoError("PNG: unknown filter type " + std::to_string(filter),
                        static_cast<long long>(static_cast<size_t>(y) * stride));
      }
      cur[i] = static_cast<std::uint8_t>(v & 0xff);
    }
  }
  return from_u8(h, w, rgb.data());
}

ImageTensor decode_png(const std::vector<std::uint8_t>& bytes) {
  return decode_png(bytes.data(), bytes.size());
}

std::vector<std::uint8_t> encode_ppm(const ImageTensor& img) {
  const auto rgb = quantize_u8(img);
  std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), rgb.begin(), rgb.end());
  return out;
}

ImageTensor decode_ppm(const std::uint8_t* bytes, size_t size) {
  size_t pos = 0;
  auto skip_space = [&] {
    while (pos < size) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < size && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_space();
    if (pos >= size || !std::isdigit(bytes[pos]))
      throw IoError(std::string("PPM: expected integer for ") + what,
                    static_cast<long long>(pos));
    long v = 0;
    while (pos < size && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    return v;
  };

  if (size < 2 || bytes[0] != 'P' || bytes[1] != '6') throw IoError("PPM: bad magic", 0);
  pos = 2;
  const long w = read_int("width");
  const long h = read_int("height");
  const long maxval = read_int("maxval");
  if (w <= 0 || h <= 0) throw IoError("PPM: bad dimensions", static_cast<long long>(pos));
  if (maxval != 255) throw IoError("PPM: only maxval 255 is supported", static_cast<long long>(pos));
  ++pos;  // single whitespace after maxval
  const size_t need = static_cast<size_t>(w) * h * 3;
  if (pos + need > size)
    throw IoError("PPM: truncated pixel data", static_cast<long long>(size));
  return from_u8(static_cast<int>(h), static_cast<int>(w), bytes + pos);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, const void* data, size_t size) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open file for writing: " + path);
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!f) throw IoError("write failed: " + path);
}

ImageTensor read_image(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0)
    return decode_png(bytes.data(), bytes.size());
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6')
    return decode_ppm(bytes.data(), bytes.size());
  throw IoError("unrecognized image format: " + path, 0);
}

void write_image(const std::string& path, const ImageTensor& img) {
  std::vector<std::uint8_t> bytes;
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".ppm") == 0)
    bytes = encode_ppm(img);
  else
    bytes = encode_png(img);
  write_file(path, bytes.data(), bytes.size());
}

}  // namespace fasvit
