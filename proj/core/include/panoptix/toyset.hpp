#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "panoptix/image.hpp"

namespace panoptix {

/// Recipe for one procedural scene. Domain "A" is blue sky / gray ground /
/// red squares ("boxthing"); domain "B" is orange sky / green ground /
/// white circles ("blobthing").
struct ToySceneSpec {
  std::string domain_id;  // "A" or "B"
  int size = 64;          // square side, one of {32, 64, 128}
  int n_instances = 1;    // 1..9
  uint64_t seed = 0;
};

struct ManifestRecord {
  std::string image_path;
  std::vector<std::string> instance_mask_paths;
  std::map<std::string, std::string> stuff_mask_paths;
  std::string domain_id;
};

struct DatasetManifest {
  int version = 1;
  std::vector<ManifestRecord> records;
};

struct SceneRecord {
  Image image;
  MaskSet masks;
  std::string domain_id;
};

/// Instance label convention per domain ("A" -> "boxthing", "B" -> "blobthing").
std::string thing_label_for_domain(const std::string& domain_id);

/// Deterministic in the spec. Returned masks partition the scene exactly:
/// every pixel is sky, ground, or exactly one instance.
std::pair<Image, MaskSet> generate_scene(const ToySceneSpec& spec);

/// Writes `count` scenes (per-scene seeds seed + index) under out_dir:
/// images/NNNNNN.png, masks/NNNNNN_inst_K.png, masks/NNNNNN_stuff_<label>.png
/// and manifest.json. Returns the written manifest.
DatasetManifest generate_dataset(const std::string& domain_id, int count, int size, uint64_t seed,
                                 const std::string& out_dir);

/// Loads manifest.json (path may be the dataset root or the manifest file),
/// normalizes images, binarizes masks and validates every record.
std::vector<SceneRecord> load_manifest(const std::string& path);

class Rng;

namespace detail {
/// Rejection-sampling placement helper, exposed for tests. Returns false if
/// `attempts` samples cannot place a box of (h, w) into the region
/// [y0, y1) x [x0, x1) without touching occupied pixels.
bool place_rect(Rng& rng, const std::vector<uint8_t>& occupied, int img_size, int y0, int y1,
                int x0, int x1, int h, int w, int attempts, int* out_y, int* out_x);
}  // namespace detail

}  // namespace panoptix
