#include "panoptix/toyset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "panoptix/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace panoptix {

namespace {

struct Rgb {
  int r, g, b;
};

int clamp255(int v) { return v < 0 ? 0 : (v > 255 ? 255 : v); }

void validate_spec(const ToySceneSpec& spec) {
  if (spec.domain_id != "A" && spec.domain_id != "B") {
    throw std::invalid_argument("toy scene domain must be \"A\" or \"B\"");
  }
  if (spec.size != 32 && spec.size != 64 && spec.size != 128) {
    throw std::invalid_argument("toy scene size must be one of {32, 64, 128}");
  }
  if (spec.n_instances < 1 || spec.n_instances > 9) {
    throw std::invalid_argument("toy scene n_instances must be in 1..9");
  }
}

void fill_rect(RawImage& img, int y0, int y1, int x0, int x1, Rgb c) {
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      size_t i = (static_cast<size_t>(y) * img.width + x) * 3;
      img.data[i] = c.r;
      img.data[i + 1] = c.g;
      img.data[i + 2] = c.b;
    }
  }
}

std::string index_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

}  // namespace

namespace detail {

bool place_rect(Rng& rng, const std::vector<uint8_t>& occupied, int img_size, int y0, int y1,
                int x0, int x1, int h, int w, int attempts, int* out_y, int* out_x) {
  if (y1 - y0 < h || x1 - x0 < w) return false;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    int y = rng.uniform_int(y0, y1 - h);
    int x = rng.uniform_int(x0, x1 - w);
    bool free = true;
    for (int yy = y; yy < y + h && free; ++yy) {
      for (int xx = x; xx < x + w; ++xx) {
        if (occupied[static_cast<size_t>(yy) * img_size + xx]) {
          free = false;
          break;
        }
      }
    }
    if (free) {
      *out_y = y;
      *out_x = x;
      return true;
    }
  }
  return false;
}

}  // namespace detail

std::string thing_label_for_domain(const std::string& domain_id) {
  if (domain_id == "A") return "boxthing";
  if (domain_id == "B") return "blobthing";
  throw std::invalid_argument("unknown domain id: " + domain_id);
}

std::pair<Image, MaskSet> generate_scene(const ToySceneSpec& spec) {
  validate_spec(spec);
  const int size = spec.size;
  const bool domain_a = spec.domain_id == "A";
  Rng rng(mix_seed(spec.seed, domain_a ? 1 : 2, static_cast<uint64_t>(size) * 16 + spec.n_instances));

  RawImage raw;
  raw.height = size;
  raw.width = size;
  raw.data.assign(static_cast<size_t>(size) * size * 3, 0);

  const int sky_rows = static_cast<int>(std::floor(0.3 * size + 0.5));

  // Sky: vertical gradient, blue family (A) or orange family (B).
  Rgb sky_top, sky_bot;
  if (domain_a) {
    sky_top = {40 + rng.uniform_int(-20, 20), 95 + rng.uniform_int(-20, 20),
               180 + rng.uniform_int(-20, 20)};
    sky_bot = {clamp255(sky_top.r + 45), clamp255(sky_top.g + 45), clamp255(sky_top.b + 25)};
  } else {
    sky_top = {220 + rng.uniform_int(-20, 20), 135 + rng.uniform_int(-18, 18),
               35 + rng.uniform_int(-15, 15)};
    sky_bot = {clamp255(sky_top.r + 25), clamp255(sky_top.g + 35), clamp255(sky_top.b + 20)};
  }
  for (int y = 0; y < sky_rows; ++y) {
    double t = sky_rows > 1 ? static_cast<double>(y) / (sky_rows - 1) : 0.0;
    Rgb c = {static_cast<int>(std::floor(sky_top.r + t * (sky_bot.r - sky_top.r) + 0.5)),
             static_cast<int>(std::floor(sky_top.g + t * (sky_bot.g - sky_top.g) + 0.5)),
             static_cast<int>(std::floor(sky_top.b + t * (sky_bot.b - sky_top.b) + 0.5))};
    fill_rect(raw, y, y + 1, 0, size, c);
  }

  // Ground: gray family (A) or green family (B), mild vertical ramp.
  Rgb ground_base;
  if (domain_a) {
    int g = 105 + rng.uniform_int(-30, 30);
    ground_base = {g, g, g};
  } else {
    ground_base = {48 + rng.uniform_int(-18, 18), 135 + rng.uniform_int(-25, 25),
                   58 + rng.uniform_int(-18, 18)};
  }
  const int ground_rows = size - sky_rows;
  for (int y = sky_rows; y < size; ++y) {
    double t = ground_rows > 1 ? static_cast<double>(y - sky_rows) / (ground_rows - 1) : 0.0;
    int ramp = static_cast<int>(std::floor(14.0 * t - 7.0 + 0.5));
    Rgb c = {clamp255(ground_base.r + ramp), clamp255(ground_base.g + ramp),
             clamp255(ground_base.b + ramp)};
    fill_rect(raw, y, y + 1, 0, size, c);
  }

  // Instances: red squares on A, white circles on B, placed on the ground
  // by rejection sampling.
  MaskSet masks;
  std::vector<uint8_t> occupied(static_cast<size_t>(size) * size, 0);
  const std::string thing_label = thing_label_for_domain(spec.domain_id);
  for (int n = 0; n < spec.n_instances; ++n) {
    BinaryMask inst = BinaryMask::zeros(size, size, thing_label);
    if (domain_a) {
      int lo = std::max(3, size / 10), hi = std::max(4, size / 6);
      int side = rng.uniform_int(lo, hi);
      Rgb c = {175 + rng.uniform_int(0, 55), 25 + rng.uniform_int(0, 35),
               25 + rng.uniform_int(0, 35)};
      int y, x;
      if (!detail::place_rect(rng, occupied, size, sky_rows, size, 0, size, side, side, 1000, &y,
                              &x)) {
        throw std::runtime_error("placement failed");
      }
      fill_rect(raw, y, y + side, x, x + side, c);
      for (int yy = y; yy < y + side; ++yy) {
        for (int xx = x; xx < x + side; ++xx) {
          inst.at(yy, xx) = 1;
          occupied[static_cast<size_t>(yy) * size + xx] = 1;
        }
      }
    } else {
      int lo = std::max(2, size / 16), hi = std::max(3, size / 10);
      int radius = rng.uniform_int(lo, hi);
      int w = 230 + rng.uniform_int(0, 22);
      Rgb c = {clamp255(w + rng.uniform_int(-3, 3)), clamp255(w + rng.uniform_int(-3, 3)),
               clamp255(w + rng.uniform_int(-3, 3))};
      int d = 2 * radius + 1;
      int y, x;
      if (!detail::place_rect(rng, occupied, size, sky_rows, size, 0, size, d, d, 1000, &y, &x)) {
        throw std::runtime_error("placement failed");
      }
      int cy = y + radius, cx = x + radius;
      for (int yy = y; yy < y + d; ++yy) {
        for (int xx = x; xx < x + d; ++xx) {
          int dy = yy - cy, dx = xx - cx;
          if (dy * dy + dx * dx <= radius * radius) {
            size_t i = (static_cast<size_t>(yy) * size + xx) * 3;
            raw.data[i] = c.r;
            raw.data[i + 1] = c.g;
            raw.data[i + 2] = c.b;
            inst.at(yy, xx) = 1;
            occupied[static_cast<size_t>(yy) * size + xx] = 1;
          }
        }
      }
    }
    masks.instances.push_back(std::move(inst));
  }

  // Stuff masks: exact partition of the non-instance pixels.
  BinaryMask sky = BinaryMask::zeros(size, size, "sky");
  BinaryMask ground = BinaryMask::zeros(size, size, "ground");
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (y < sky_rows) {
        sky.at(y, x) = 1;
      } else if (!occupied[static_cast<size_t>(y) * size + x]) {
        ground.at(y, x) = 1;
      }
    }
  }
  masks.stuff.emplace("sky", std::move(sky));
  masks.stuff.emplace("ground", std::move(ground));

  return {normalize(raw), std::move(masks)};
}

DatasetManifest generate_dataset(const std::string& domain_id, int count, int size, uint64_t seed,
                                 const std::string& out_dir) {
  if (count < 1) throw std::invalid_argument("dataset count must be >= 1");
  fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  fs::create_directories(root / "masks", ec);
  if (!fs::is_directory(root / "images") || !fs::is_directory(root / "masks")) {
    throw std::runtime_error("cannot create dataset directories under " + out_dir);
  }

  DatasetManifest manifest;
  for (int i = 0; i < count; ++i) {
    ToySceneSpec spec;
    spec.domain_id = domain_id;
    spec.size = size;
    spec.seed = seed + static_cast<uint64_t>(i);
    // Instance count cycles 1..3 so every dataset exercises multi-instance
    // scenes without starving single-instance ones.
    spec.n_instances = 1 + i % 3;
    auto [image, masks] = generate_scene(spec);

    const std::string name = index_name(i);
    ManifestRecord rec;
    rec.domain_id = domain_id;
    rec.image_path = "images/" + name + ".png";
    save_image_png(image, (root / rec.image_path).string());
    for (size_t k = 0; k < masks.instances.size(); ++k) {
      std::string rel = "masks/" + name + "_inst_" + std::to_string(k) + ".png";
      save_mask_png(masks.instances[k], (root / rel).string());
      rec.instance_mask_paths.push_back(rel);
    }
    for (const auto& [label, mask] : masks.stuff) {
      std::string rel = "masks/" + name + "_stuff_" + label + ".png";
      save_mask_png(mask, (root / rel).string());
      rec.stuff_mask_paths.emplace(label, rel);
    }
    manifest.records.push_back(std::move(rec));
  }

  json j;
  j["version"] = manifest.version;
  json records = json::array();
  for (const auto& rec : manifest.records) {
    json r;
    r["image_path"] = rec.image_path;
    r["instance_mask_paths"] = rec.instance_mask_paths;
    r["stuff_mask_paths"] = rec.stuff_mask_paths;
    r["domain_id"] = rec.domain_id;
    records.push_back(std::move(r));
  }
  j["records"] = std::move(records);
  std::ofstream f(root / "manifest.json", std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + (root / "manifest.json").string());
  f << j.dump(2) << "\n";
  f.close();

  load_manifest((root / "manifest.json").string());  // reload-validate
  return manifest;
}

std::vector<SceneRecord> load_manifest(const std::string& path) {
  fs::path manifest_path(path);
  if (fs::is_directory(manifest_path)) manifest_path /= "manifest.json";
  std::ifstream f(manifest_path);
  if (!f) throw std::runtime_error("cannot open manifest: " + manifest_path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("version") || !j.contains("records") ||
      !j["records"].is_array()) {
    throw std::runtime_error("malformed manifest " + manifest_path.string() +
                             ": missing version/records");
  }
  if (j["version"].get<int>() != 1) {
    throw std::runtime_error("unsupported manifest version in " + manifest_path.string());
  }

  const fs::path root = manifest_path.parent_path();
  std::vector<SceneRecord> out;
  int height = -1, width = -1;
  for (size_t i = 0; i < j["records"].size(); ++i) {
    const json& r = j["records"][i];
    try {
      SceneRecord rec;
      rec.domain_id = r.at("domain_id").get<std::string>();
      rec.image = load_image_png((root / r.at("image_path").get<std::string>()).string());
      const std::string thing_label = thing_label_for_domain(rec.domain_id);
      for (const auto& rel : r.at("instance_mask_paths")) {
        rec.masks.instances.push_back(
            load_mask_png((root / rel.get<std::string>()).string(), thing_label));
      }
      for (const auto& [label, rel] : r.at("stuff_mask_paths").items()) {
        rec.masks.stuff.emplace(label, load_mask_png((root / rel.get<std::string>()).string(), label));
      }
      if (height < 0) {
        height = rec.image.height;
        width = rec.image.width;
      } else if (rec.image.height != height || rec.image.width != width) {
        throw std::runtime_error("mixed image sizes in dataset");
      }
      auto violations = validate_scene(rec.image, rec.masks);
      if (!violations.empty()) {
        throw std::runtime_error("invalid scene: " + violations.front());
      }
      out.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw std::runtime_error("malformed manifest record " + std::to_string(i) + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("record " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace panoptix
