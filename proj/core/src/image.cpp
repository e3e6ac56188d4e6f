#include "panoptix/image.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "panoptix/png_io.hpp"

namespace panoptix {

Image Image::zeros(int h, int w) {
  Image img;
  img.height = h;
  img.width = w;
  img.pixels.assign(static_cast<size_t>(h) * w * 3, 0.0);
  return img;
}

BinaryMask BinaryMask::zeros(int h, int w, std::string label) {
  BinaryMask m;
  m.height = h;
  m.width = w;
  m.label = std::move(label);
  m.bits.assign(static_cast<size_t>(h) * w, 0);
  return m;
}

int64_t BinaryMask::count() const {
  int64_t n = 0;
  for (uint8_t b : bits) n += b;
  return n;
}

namespace {

std::string shape_str(int h, int w) {
  std::ostringstream os;
  os << "(" << h << "," << w << ")";
  return os.str();
}

void validate_mask(const Image& image, const BinaryMask& m, const std::string& who,
                   std::vector<std::string>& out) {
  if (m.bits.size() != static_cast<size_t>(m.height) * static_cast<size_t>(m.width)) {
    out.push_back(who + ": bit count does not match shape");
    return;
  }
  if (m.height != image.height || m.width != image.width) {
    out.push_back(who + ": shape " + shape_str(m.height, m.width) + " != " +
                  shape_str(image.height, image.width));
  }
  for (uint8_t b : m.bits) {
    if (b != 0 && b != 1) {
      out.push_back(who + ": non-binary value " + std::to_string(int(b)));
      break;
    }
  }
}

}  // namespace

std::vector<std::string> validate_scene(const Image& image, const MaskSet& masks) {
  std::vector<std::string> out;
  if (image.height < 8 || image.width < 8) {
    out.push_back("image: shape " + shape_str(image.height, image.width) + " below minimum (8,8)");
  }
  if (image.height % 4 != 0 || image.width % 4 != 0) {
    out.push_back("image: shape " + shape_str(image.height, image.width) + " not divisible by 4");
  }
  if (image.pixels.size() != static_cast<size_t>(image.height) * image.width * 3) {
    out.push_back("image: pixel count does not match shape");
    return out;
  }
  for (double v : image.pixels) {
    if (!std::isfinite(v) || v < -1.0 || v > 1.0) {
      out.push_back("image: pixel value outside [-1, 1]");
      break;
    }
  }
  for (size_t i = 0; i < masks.instances.size(); ++i) {
    const BinaryMask& m = masks.instances[i];
    validate_mask(image, m, "mask '" + m.label + "'", out);
  }
  for (const auto& [label, m] : masks.stuff) {
    validate_mask(image, m, "mask '" + label + "'", out);
  }
  // Pairwise disjointness of instance masks.
  for (size_t i = 0; i < masks.instances.size(); ++i) {
    for (size_t j = i + 1; j < masks.instances.size(); ++j) {
      const BinaryMask& a = masks.instances[i];
      const BinaryMask& b = masks.instances[j];
      if (!a.same_shape(b) || a.bits.size() != b.bits.size()) continue;
      for (size_t k = 0; k < a.bits.size(); ++k) {
        if (a.bits[k] && b.bits[k]) {
          out.push_back("instance masks " + std::to_string(i) + "," + std::to_string(j) +
                        " overlap");
          break;
        }
      }
    }
  }
  return out;
}

BinaryMask mask_union(const std::vector<BinaryMask>& masks) {
  if (masks.empty()) throw std::invalid_argument("empty mask list");
  BinaryMask out = masks[0];
  out.label = "union";
  for (size_t i = 1; i < masks.size(); ++i) {
    if (!masks[i].same_shape(out)) {
      throw std::invalid_argument("mask_union: shape mismatch between masks 0 and " +
                                  std::to_string(i));
    }
    for (size_t k = 0; k < out.bits.size(); ++k) {
      out.bits[k] = out.bits[k] | masks[i].bits[k];
    }
  }
  return out;
}

Image normalize(const RawImage& raw) {
  if (raw.height <= 0 || raw.width <= 0 ||
      raw.data.size() != static_cast<size_t>(raw.height) * raw.width * 3) {
    throw std::invalid_argument("normalize: raw image shape mismatch");
  }
  Image img = Image::zeros(raw.height, raw.width);
  for (size_t i = 0; i < raw.data.size(); ++i) {
    int v = raw.data[i];
    if (v < 0 || v > 255) {
      throw std::invalid_argument("normalize: channel value " + std::to_string(v) +
                                  " outside 0-255");
    }
    img.pixels[i] = static_cast<double>(v) / 127.5 - 1.0;
  }
  return img;
}

RawImage denormalize(const Image& image) {
  RawImage raw;
  raw.height = image.height;
  raw.width = image.width;
  raw.data.resize(image.pixels.size());
  for (size_t i = 0; i < image.pixels.size(); ++i) {
    double v = (image.pixels[i] + 1.0) * 127.5;
    int q = static_cast<int>(std::floor(v + 0.5));  // round half up
    if (q < 0) q = 0;
    if (q > 255) q = 255;
    raw.data[i] = q;
  }
  return raw;
}

Image load_image_png(const std::string& path) {
  PngPixels px = read_png(path);
  if (px.channels != 3) {
    throw std::runtime_error("expected 8-bit RGB PNG: " + path);
  }
  RawImage raw;
  raw.height = px.height;
  raw.width = px.width;
  raw.data.assign(px.data.begin(), px.data.end());
  return normalize(raw);
}

void save_image_png(const Image& image, const std::string& path) {
  RawImage raw = denormalize(image);
  std::vector<uint8_t> bytes(raw.data.size());
  for (size_t i = 0; i < raw.data.size(); ++i) bytes[i] = static_cast<uint8_t>(raw.data[i]);
  write_png_rgb(path, raw.height, raw.width, bytes.data());
}

BinaryMask load_mask_png(const std::string& path, const std::string& label) {
  PngPixels px = read_png(path);
  if (px.channels != 1) {
    throw std::runtime_error("expected 8-bit grayscale mask PNG: " + path);
  }
  BinaryMask m = BinaryMask::zeros(px.height, px.width, label);
  for (size_t i = 0; i < px.data.size(); ++i) {
    if (px.data[i] == 255) {
      m.bits[i] = 1;
    } else if (px.data[i] != 0) {
      throw std::runtime_error("non-binary mask pixel value " + std::to_string(int(px.data[i])) +
                               " in " + path);
    }
  }
  return m;
}

void save_mask_png(const BinaryMask& mask, const std::string& path) {
  std::vector<uint8_t> bytes(mask.bits.size());
  for (size_t i = 0; i < mask.bits.size(); ++i) bytes[i] = mask.bits[i] ? 255 : 0;
  write_png_gray(path, mask.height, mask.width, bytes.data());
}

}  // namespace panoptix
