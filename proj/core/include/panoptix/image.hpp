#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace panoptix {

/// H x W x 3 picture with values in [-1, 1]; the unit every network
/// consumes and produces.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // (H, W, 3) row-major

  static Image zeros(int h, int w);

  double& at(int y, int x, int c) {
    return pixels[static_cast<size_t>((static_cast<int64_t>(y) * width + x) * 3 + c)];
  }
  double at(int y, int x, int c) const {
    return pixels[static_cast<size_t>((static_cast<int64_t>(y) * width + x) * 3 + c)];
  }
  int64_t pixel_count() const { return static_cast<int64_t>(height) * width; }
  bool same_shape(const Image& o) const { return height == o.height && width == o.width; }
};

/// Strictly binary (H, W) mask with a semantic label.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::string label;
  std::vector<uint8_t> bits;  // 0 or 1

  static BinaryMask zeros(int h, int w, std::string label);

  uint8_t& at(int y, int x) { return bits[static_cast<size_t>(static_cast<int64_t>(y) * width + x)]; }
  uint8_t at(int y, int x) const { return bits[static_cast<size_t>(static_cast<int64_t>(y) * width + x)]; }
  int64_t count() const;
  bool same_shape(const BinaryMask& o) const { return height == o.height && width == o.width; }
};

/// Ordered instance masks (things) plus labeled stuff masks. Instance order
/// is the sequential translation order.
struct MaskSet {
  std::vector<BinaryMask> instances;
  std::map<std::string, BinaryMask> stuff;
};

/// Checks every scene invariant; returns one finding per broken rule and
/// never throws. Empty result means the scene is valid.
std::vector<std::string> validate_scene(const Image& image, const MaskSet& masks);

/// Element-wise OR of a non-empty, shape-consistent mask list; result is
/// labeled "union".
BinaryMask mask_union(const std::vector<BinaryMask>& masks);

/// Integer image with channel values 0-255, shape (H, W, 3).
struct RawImage {
  int height = 0;
  int width = 0;
  std::vector<int> data;
};

/// v -> v / 127.5 - 1. Errors on wrong shape or out-of-range values.
Image normalize(const RawImage& raw);

/// Inverse of normalize: rounds half-up and clamps to 0-255.
/// denormalize(normalize(raw)) == raw exactly.
RawImage denormalize(const Image& image);

// PNG bridges (8-bit RGB for images; 8-bit grayscale 0/255 for masks).
Image load_image_png(const std::string& path);
void save_image_png(const Image& image, const std::string& path);
BinaryMask load_mask_png(const std::string& path, const std::string& label);
void save_mask_png(const BinaryMask& mask, const std::string& path);

}  // namespace panoptix
