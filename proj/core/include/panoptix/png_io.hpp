#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace panoptix {

/// Decoded 8-bit pixel buffer, row-major; channels is 1 (gray) or 3 (RGB).
struct PngPixels {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<uint8_t> data;
};

/// Reads a non-interlaced 8-bit grayscale or RGB PNG. Any other layout is a
/// load error naming the path.
PngPixels read_png(const std::string& path);

void write_png_rgb(const std::string& path, int height, int width, const uint8_t* rgb);
void write_png_gray(const std::string& path, int height, int width, const uint8_t* gray);

}  // namespace panoptix
