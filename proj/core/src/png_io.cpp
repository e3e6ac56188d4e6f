#include "panoptix/png_io.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace panoptix {

namespace {

const uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void append_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& payload) {
  put_u32(out, static_cast<uint32_t>(payload.size()));
  size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  uint32_t crc = static_cast<uint32_t>(
      crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
  put_u32(out, crc);
}

void write_png(const std::string& path, int height, int width, int channels, const uint8_t* pixels) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("png write: empty image");
  const size_t stride = static_cast<size_t>(width) * static_cast<size_t>(channels);
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(height) * (stride + 1));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: None
    raw.insert(raw.end(), pixels + static_cast<size_t>(y) * stride,
               pixels + static_cast<size_t>(y) * stride + stride);
  }

  uLongf comp_bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(comp_bound);
  if (compress2(compressed.data(), &comp_bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw std::runtime_error("png write: deflate failed for " + path);
  }
  compressed.resize(comp_bound);

  std::vector<uint8_t> out(kSignature, kSignature + 8);
  std::vector<uint8_t> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(width));
  put_u32(ihdr, static_cast<uint32_t>(height));
  ihdr.push_back(8);                                   // bit depth
  ihdr.push_back(channels == 1 ? 0 : 2);               // color type: gray / RGB
  ihdr.push_back(0);                                   // compression
  ihdr.push_back(0);                                   // filter method
  ihdr.push_back(0);                                   // no interlace
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", compressed);
  append_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void write_png_rgb(const std::string& path, int height, int width, const uint8_t* rgb) {
  write_png(path, height, width, 3, rgb);
}

void write_png_gray(const std::string& path, int height, int width, const uint8_t* gray) {
  write_png(path, height, width, 1, gray);
}

PngPixels read_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open PNG: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  auto fail = [&path](const std::string& why) -> std::runtime_error {
    return std::runtime_error("bad PNG " + path + ": " + why);
  };
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0) throw fail("not a PNG file");

  size_t pos = 8;
  int width = 0, height = 0, channels = 0;
  bool saw_ihdr = false, saw_iend = false;
  std::vector<uint8_t> idat;
  while (pos + 12 <= bytes.size()) {
    uint32_t len = get_u32(bytes.data() + pos);
    if (pos + 12 + len > bytes.size()) throw fail("truncated chunk");
    const uint8_t* type = bytes.data() + pos + 4;
    const uint8_t* payload = bytes.data() + pos + 8;
    uint32_t crc_expected = get_u32(payload + len);
    uint32_t crc_actual =
        static_cast<uint32_t>(crc32(0L, bytes.data() + pos + 4, static_cast<uInt>(len + 4)));
    if (crc_expected != crc_actual) throw fail("chunk CRC mismatch");

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw fail("bad IHDR length");
      width = static_cast<int>(get_u32(payload));
      height = static_cast<int>(get_u32(payload + 4));
      int bit_depth = payload[8], color_type = payload[9], interlace = payload[12];
      if (bit_depth != 8) throw fail("unsupported bit depth (need 8)");
      if (color_type == 0) channels = 1;
      else if (color_type == 2) channels = 3;
      else throw fail("unsupported color type (need 8-bit RGB or grayscale)");
      if (interlace != 0) throw fail("interlaced PNG not supported");
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
      break;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || !saw_iend || idat.empty()) throw fail("missing required chunks");
  if (width <= 0 || height <= 0) throw fail("empty image");

  const size_t stride = static_cast<size_t>(width) * static_cast<size_t>(channels);
  const size_t raw_size = static_cast<size_t>(height) * (stride + 1);
  std::vector<uint8_t> raw(raw_size);
  uLongf dest_len = static_cast<uLongf>(raw_size);
  int zrc = uncompress(raw.data(), &dest_len, idat.data(), static_cast<uLong>(idat.size()));
  if (zrc != Z_OK || dest_len != raw_size) throw fail("inflate failed");

  PngPixels out;
  out.height = height;
  out.width = width;
  out.channels = channels;
  out.data.resize(static_cast<size_t>(height) * stride);
  const int bpp = channels;  // bytes per pixel at 8-bit depth
  for (int y = 0; y < height; ++y) {
    uint8_t filter = raw[static_cast<size_t>(y) * (stride + 1)];
    const uint8_t* src = raw.data() + static_cast<size_t>(y) * (stride + 1) + 1;
    uint8_t* cur = out.data.data() + static_cast<size_t>(y) * stride;
    const uint8_t* prev = y > 0 ? out.data.data() + static_cast<size_t>(y - 1) * stride : nullptr;
    for (size_t x = 0; x < stride; ++x) {
      int a = x >= static_cast<size_t>(bpp) ? cur[x - bpp] : 0;
      int b = prev ? prev[x] : 0;
      int c = (prev && x >= static_cast<size_t>(bpp)) ? prev[x - bpp] : 0;
      int v;
      switch (filter) {
        case 0: v = src[x]; break;
        case 1: v = src[x] + a; break;
        case 2: v = src[x] + b; break;
        case 3: v = src[x] + (a + b) / 2; break;
        case 4: v = src[x] + paeth(a, b, c); break;
        default: throw fail("unknown filter type");
      }
      cur[x] = static_cast<uint8_t>(v & 0xff);
    }
  }
  return out;
}

}  // namespace panoptix
