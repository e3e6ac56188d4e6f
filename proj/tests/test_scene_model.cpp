#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "panoptix/image.hpp"
#include "panoptix/rng.hpp"

using namespace panoptix;

namespace {

Image valid_image(int h, int w, double fill = 0.0) {
  Image img = Image::zeros(h, w);
  for (auto& v : img.pixels) v = fill;
  return img;
}

BinaryMask random_mask(int h, int w, Rng& rng, const std::string& label) {
  BinaryMask m = BinaryMask::zeros(h, w, label);
  for (auto& b : m.bits) b = rng.uniform() < 0.5 ? 1 : 0;
  return m;
}

}  // namespace

TEST_CASE("validate_scene accepts a valid-by-construction scene") {
  Image img = valid_image(8, 8);
  MaskSet masks;
  BinaryMask a = BinaryMask::zeros(8, 8, "car");
  a.at(0, 0) = 1;
  BinaryMask b = BinaryMask::zeros(8, 8, "car");
  b.at(3, 3) = 1;
  masks.instances = {a, b};
  CHECK(validate_scene(img, masks).empty());
}

TEST_CASE("validate_scene names a wrong-shaped mask") {
  Image img = valid_image(8, 8);
  MaskSet masks;
  masks.instances.push_back(BinaryMask::zeros(4, 4, "car"));
  auto violations = validate_scene(img, masks);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0] == "mask 'car': shape (4,4) != (8,8)");
}

TEST_CASE("validate_scene reports overlapping instance masks by index") {
  Image img = valid_image(8, 8);
  BinaryMask m = BinaryMask::zeros(8, 8, "car");
  m.at(2, 2) = 1;
  MaskSet masks;
  masks.instances = {m, m};
  auto violations = validate_scene(img, masks);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0] == "instance masks 0,1 overlap");
}

TEST_CASE("validate_scene flags image invariants") {
  SUBCASE("too small") {
    Image img = valid_image(4, 4);
    auto v = validate_scene(img, {});
    CHECK(!v.empty());
  }
  SUBCASE("not divisible by 4") {
    Image img = valid_image(10, 12);
    auto v = validate_scene(img, {});
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("not divisible by 4") != std::string::npos);
  }
  SUBCASE("out of range pixel") {
    Image img = valid_image(8, 8);
    img.pixels[5] = 1.5;
    auto v = validate_scene(img, {});
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("outside [-1, 1]") != std::string::npos);
  }
  SUBCASE("non-finite pixel") {
    Image img = valid_image(8, 8);
    img.pixels[0] = std::nan("");
    CHECK(!validate_scene(img, {}).empty());
  }
}

TEST_CASE("mask_union: OR identity and complementary halves") {
  BinaryMask zeros = BinaryMask::zeros(8, 8, "z");
  BinaryMask u = mask_union({zeros, zeros});
  CHECK(u.count() == 0);
  CHECK(u.label == "union");

  BinaryMask left = BinaryMask::zeros(8, 8, "l");
  BinaryMask right = BinaryMask::zeros(8, 8, "r");
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      (x < 4 ? left : right).at(y, x) = 1;
    }
  }
  BinaryMask full = mask_union({left, right});
  CHECK(full.count() == 64);
}

TEST_CASE("mask_union matches a scalar per-pixel OR oracle on random masks") {
  Rng rng(42);
  std::vector<BinaryMask> masks;
  for (int k = 0; k < 5; ++k) masks.push_back(random_mask(8, 8, rng, "m" + std::to_string(k)));
  BinaryMask u = mask_union(masks);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      uint8_t expected = 0;
      for (const auto& m : masks) expected |= m.at(y, x);
      CHECK(u.at(y, x) == expected);
    }
  }
}

TEST_CASE("mask_union errors") {
  CHECK_THROWS_WITH_AS(mask_union({}), "empty mask list", std::invalid_argument);
  BinaryMask a = BinaryMask::zeros(8, 8, "a");
  BinaryMask b = BinaryMask::zeros(4, 4, "b");
  CHECK_THROWS_AS(mask_union({a, b}), std::invalid_argument);
}

TEST_CASE("mask_union properties: idempotent, commutative, monotone") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    BinaryMask a = random_mask(8, 8, rng, "a");
    BinaryMask b = random_mask(8, 8, rng, "b");
    BinaryMask ab = mask_union({a, b});
    BinaryMask ba = mask_union({b, a});
    BinaryMask aa = mask_union({a, a});
    CHECK(ab.bits == ba.bits);
    CHECK(aa.bits == a.bits);
    for (size_t i = 0; i < ab.bits.size(); ++i) {
      CHECK(ab.bits[i] >= a.bits[i]);
      CHECK(ab.bits[i] >= b.bits[i]);
    }
  }
}

TEST_CASE("normalize endpoints and formula") {
  RawImage raw;
  raw.height = 8;
  raw.width = 8;
  raw.data.assign(8 * 8 * 3, 0);
  raw.data[0] = 0;
  raw.data[1] = 255;
  Image img = normalize(raw);
  CHECK(img.pixels[0] == doctest::Approx(-1.0));
  CHECK(img.pixels[1] == doctest::Approx(1.0));

  RawImage gray;
  gray.height = 2;
  gray.width = 2;
  gray.data.assign(2 * 2 * 3, 128);
  Image g = normalize(gray);
  for (double v : g.pixels) CHECK(v == doctest::Approx(128.0 / 127.5 - 1.0));
}

TEST_CASE("denormalize of normalize is the identity on all 256 channel values") {
  RawImage raw;
  raw.height = 1;  // shape validity is not the concern here
  raw.width = 256;
  raw.data.resize(256 * 3);
  for (int v = 0; v < 256; ++v) {
    raw.data[static_cast<size_t>(v) * 3] = v;
    raw.data[static_cast<size_t>(v) * 3 + 1] = v;
    raw.data[static_cast<size_t>(v) * 3 + 2] = v;
  }
  RawImage back = denormalize(normalize(raw));
  CHECK(back.data == raw.data);
}

TEST_CASE("normalize rejects bad input") {
  RawImage raw;
  raw.height = 2;
  raw.width = 2;
  raw.data.assign(5, 0);  // wrong element count
  CHECK_THROWS_AS(normalize(raw), std::invalid_argument);

  raw.data.assign(2 * 2 * 3, 0);
  raw.data[3] = 256;
  CHECK_THROWS_AS(normalize(raw), std::invalid_argument);
  raw.data[3] = -1;
  CHECK_THROWS_AS(normalize(raw), std::invalid_argument);
}
