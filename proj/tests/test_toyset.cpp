#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "panoptix/metrics.hpp"
#include "panoptix/png_io.hpp"
#include "panoptix/rng.hpp"
#include "panoptix/toyset.hpp"

using namespace panoptix;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "panoptix_toyset" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

/// Flood-fill 4-connectivity check.
bool four_connected(const BinaryMask& m) {
  const int64_t total = m.count();
  if (total == 0) return false;
  int sy = -1, sx = -1;
  for (int y = 0; y < m.height && sy < 0; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (m.at(y, x)) {
        sy = y;
        sx = x;
        break;
      }
    }
  }
  std::vector<uint8_t> seen(static_cast<size_t>(m.height) * m.width, 0);
  std::vector<std::pair<int, int>> stack = {{sy, sx}};
  seen[static_cast<size_t>(sy) * m.width + sx] = 1;
  int64_t reached = 0;
  while (!stack.empty()) {
    auto [y, x] = stack.back();
    stack.pop_back();
    ++reached;
    const int dy[] = {1, -1, 0, 0}, dx[] = {0, 0, 1, -1};
    for (int d = 0; d < 4; ++d) {
      int ny = y + dy[d], nx = x + dx[d];
      if (ny < 0 || ny >= m.height || nx < 0 || nx >= m.width) continue;
      size_t idx = static_cast<size_t>(ny) * m.width + nx;
      if (m.at(ny, nx) && !seen[idx]) {
        seen[idx] = 1;
        stack.emplace_back(ny, nx);
      }
    }
  }
  return reached == total;
}

bool files_identical(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  std::vector<char> ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::vector<char> bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  return !ba.empty() && ba == bb;
}

}  // namespace

TEST_CASE("generate_scene is deterministic in the spec") {
  ToySceneSpec spec{"A", 32, 1, 7};
  auto [img1, masks1] = generate_scene(spec);
  auto [img2, masks2] = generate_scene(spec);
  CHECK(img1.pixels == img2.pixels);
  REQUIRE(masks1.instances.size() == 1);
  CHECK(masks1.instances[0].bits == masks2.instances[0].bits);
  CHECK(masks1.stuff.at("sky").bits == masks2.stuff.at("sky").bits);
}

TEST_CASE("generate_scene rejects invalid specs") {
  CHECK_THROWS_AS(generate_scene({"C", 32, 1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(generate_scene({"A", 48, 1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(generate_scene({"A", 32, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(generate_scene({"A", 32, 10, 0}), std::invalid_argument);
}

TEST_CASE("domain A scene partitions exactly into sky, ground and instances") {
  ToySceneSpec spec{"A", 64, 3, 1};
  auto [img, masks] = generate_scene(spec);
  CHECK(validate_scene(img, masks).empty());
  REQUIRE(masks.instances.size() == 3);
  for (const auto& m : masks.instances) CHECK(m.label == "boxthing");

  // Pairwise disjoint instances, and {sky, ground, instances} cover every
  // pixel exactly once.
  std::vector<BinaryMask> all = masks.instances;
  all.push_back(masks.stuff.at("sky"));
  all.push_back(masks.stuff.at("ground"));
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      int owners = 0;
      for (const auto& m : all) owners += m.at(y, x);
      CHECK(owners == 1);
    }
  }
}

TEST_CASE("domain B places nine 4-connected circles at size 32") {
  ToySceneSpec spec{"B", 32, 9, 2};
  auto [img, masks] = generate_scene(spec);
  REQUIRE(masks.instances.size() == 9);
  for (const auto& m : masks.instances) {
    CHECK(m.label == "blobthing");
    CHECK(m.count() > 0);
    CHECK(four_connected(m));
  }
  CHECK(validate_scene(img, masks).empty());
}

TEST_CASE("placement helper gives up in a cramped region") {
  Rng rng(5);
  std::vector<uint8_t> occupied(32 * 32, 1);  // everything taken
  int y, x;
  CHECK_FALSE(detail::place_rect(rng, occupied, 32, 10, 32, 0, 32, 4, 4, 1000, &y, &x));
  // And a region smaller than the box fails immediately.
  std::vector<uint8_t> free_map(32 * 32, 0);
  CHECK_FALSE(detail::place_rect(rng, free_map, 32, 0, 3, 0, 3, 4, 4, 1000, &y, &x));
}

TEST_CASE("generate_dataset writes the documented layout and reloads clean") {
  fs::path dir = fresh_dir("ds_small");
  DatasetManifest manifest = generate_dataset("A", 1, 32, 0, dir.string());
  REQUIRE(manifest.records.size() == 1);
  CHECK(fs::exists(dir / "images/000000.png"));
  CHECK(fs::exists(dir / "masks/000000_inst_0.png"));
  CHECK(fs::exists(dir / "masks/000000_stuff_sky.png"));
  CHECK(fs::exists(dir / "masks/000000_stuff_ground.png"));
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(manifest.records[0].instance_mask_paths.size() == 1);
  CHECK(manifest.records[0].stuff_mask_paths.size() == 2);

  auto scenes = load_manifest(dir.string());
  REQUIRE(scenes.size() == 1);
  CHECK(scenes[0].domain_id == "A");
}

TEST_CASE("a 20-scene dataset reloads with every record validating clean") {
  fs::path dir = fresh_dir("ds20");
  generate_dataset("A", 20, 64, 5, dir.string());
  auto scenes = load_manifest((dir / "manifest.json").string());
  REQUIRE(scenes.size() == 20);
  for (const auto& rec : scenes) {
    CHECK(validate_scene(rec.image, rec.masks).empty());
    CHECK(rec.image.height == 64);
  }
}

TEST_CASE("identical arguments produce byte-identical file trees") {
  fs::path d1 = fresh_dir("det1"), d2 = fresh_dir("det2");
  generate_dataset("B", 3, 32, 11, d1.string());
  generate_dataset("B", 3, 32, 11, d2.string());
  size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(d1)) {
    if (!entry.is_regular_file()) continue;
    fs::path rel = fs::relative(entry.path(), d1);
    CHECK(files_identical(entry.path(), d2 / rel));
    ++compared;
  }
  CHECK(compared == 3 + 3 * 2 + 6 + 1);  // images + stuff masks + inst masks (1+2+3) + manifest
}

TEST_CASE("load_manifest errors name the problem") {
  fs::path dir = fresh_dir("ds_err");
  generate_dataset("A", 2, 32, 3, dir.string());

  SUBCASE("missing image file") {
    fs::remove(dir / "images/000001.png");
    CHECK_THROWS_WITH_AS(load_manifest(dir.string()), doctest::Contains("000001.png"),
                         std::runtime_error);
  }
  SUBCASE("non-binary mask pixel") {
    // Rewrite one mask with an off-lattice value.
    auto masks = load_manifest(dir.string());
    BinaryMask bad = masks[0].masks.instances[0];
    std::vector<uint8_t> bytes(bad.bits.size());
    for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = bad.bits[i] ? 255 : 0;
    bytes[0] = 17;
    write_png_gray((dir / "masks/000000_inst_0.png").string(), bad.height, bad.width, bytes.data());
    CHECK_THROWS_WITH_AS(load_manifest(dir.string()), doctest::Contains("non-binary mask"),
                         std::runtime_error);
  }
  SUBCASE("malformed manifest") {
    std::ofstream f(dir / "manifest.json", std::ios::trunc);
    f << "{ not json";
    f.close();
    CHECK_THROWS_WITH_AS(load_manifest(dir.string()), doctest::Contains("malformed manifest"),
                         std::runtime_error);
  }
  SUBCASE("missing manifest") {
    CHECK_THROWS_AS(load_manifest((dir / "nope").string()), std::runtime_error);
  }
}

TEST_CASE("sky hue separates domains A and B by at least 0.2") {
  double hue_a_x = 0, hue_a_y = 0, hue_b_x = 0, hue_b_y = 0;
  const double two_pi = 6.283185307179586;
  int n = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto [img_a, masks_a] = generate_scene({"A", 32, 1, seed});
    auto [img_b, masks_b] = generate_scene({"B", 32, 1, seed});
    double ha = mean_hue(img_a, &masks_a.stuff.at("sky"));
    double hb = mean_hue(img_b, &masks_b.stuff.at("sky"));
    hue_a_x += std::cos(ha * two_pi);
    hue_a_y += std::sin(ha * two_pi);
    hue_b_x += std::cos(hb * two_pi);
    hue_b_y += std::sin(hb * two_pi);
    ++n;
  }
  double mean_a = std::atan2(hue_a_y, hue_a_x) / two_pi;
  double mean_b = std::atan2(hue_b_y, hue_b_x) / two_pi;
  if (mean_a < 0) mean_a += 1.0;
  if (mean_b < 0) mean_b += 1.0;
  CHECK(hue_distance(mean_a, mean_b) >= 0.2);
}
