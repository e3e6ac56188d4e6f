#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "panoptix/image.hpp"
#include "panoptix/png_io.hpp"
#include "panoptix/rng.hpp"

using namespace panoptix;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  fs::path p = fs::temp_directory_path() / "panoptix_png_test";
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("RGB PNG round trip preserves every byte") {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const int h = 8 + 4 * trial, w = 12;
    std::vector<uint8_t> pixels(static_cast<size_t>(h) * w * 3);
    for (auto& v : pixels) v = static_cast<uint8_t>(rng.uniform_int(INT64_C(256)));
    const std::string path = (temp_dir() / "rt_rgb.png").string();
    write_png_rgb(path, h, w, pixels.data());
    PngPixels back = read_png(path);
    CHECK(back.height == h);
    CHECK(back.width == w);
    CHECK(back.channels == 3);
    CHECK(back.data == pixels);
  }
}

TEST_CASE("grayscale PNG round trip") {
  std::vector<uint8_t> pixels(16 * 16);
  for (size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<uint8_t>(i % 251);
  const std::string path = (temp_dir() / "rt_gray.png").string();
  write_png_gray(path, 16, 16, pixels.data());
  PngPixels back = read_png(path);
  CHECK(back.channels == 1);
  CHECK(back.data == pixels);
}

TEST_CASE("reader rejects garbage and truncation") {
  const std::string path = (temp_dir() / "bad.png").string();
  {
    std::ofstream f(path, std::ios::binary);
    f << "not a png at all";
  }
  CHECK_THROWS_AS(read_png(path), std::runtime_error);
  CHECK_THROWS_AS(read_png((temp_dir() / "missing.png").string()), std::runtime_error);

  // Corrupt a valid file's payload byte to break the chunk CRC.
  std::vector<uint8_t> pixels(8 * 8 * 3, 100);
  const std::string good = (temp_dir() / "crc.png").string();
  write_png_rgb(good, 8, 8, pixels.data());
  std::ifstream in(good, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  bytes[bytes.size() / 2] ^= 0x5a;
  std::ofstream out(good, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  CHECK_THROWS_AS(read_png(good), std::runtime_error);
}

TEST_CASE("mask PNG loader enforces 0/255 pixels") {
  const std::string path = (temp_dir() / "mask17.png").string();
  std::vector<uint8_t> pixels(8 * 8, 0);
  pixels[10] = 255;
  pixels[20] = 17;
  write_png_gray(path, 8, 8, pixels.data());
  CHECK_THROWS_WITH_AS(load_mask_png(path, "m"),
                       doctest::Contains("non-binary mask"), std::runtime_error);

  pixels[20] = 0;
  write_png_gray(path, 8, 8, pixels.data());
  BinaryMask m = load_mask_png(path, "m");
  CHECK(m.count() == 1);
  CHECK(m.label == "m");
}

TEST_CASE("image PNG save/load round trips through the [-1,1] convention") {
  Rng rng(9);
  Image img = Image::zeros(8, 8);
  for (auto& v : img.pixels) {
    // Values on the exact uint8 lattice survive the round trip bit-exactly.
    v = static_cast<double>(rng.uniform_int(INT64_C(256))) / 127.5 - 1.0;
  }
  const std::string path = (temp_dir() / "img.png").string();
  save_image_png(img, path);
  Image back = load_image_png(path);
  REQUIRE(back.pixels.size() == img.pixels.size());
  for (size_t i = 0; i < img.pixels.size(); ++i) CHECK(back.pixels[i] == img.pixels[i]);
}

TEST_CASE("image loader rejects grayscale input") {
  const std::string path = (temp_dir() / "gray_as_img.png").string();
  std::vector<uint8_t> g(8 * 8, 7);
  write_png_gray(path, 8, 8, g.data());
  CHECK_THROWS_AS(load_image_png(path), std::runtime_error);
}
