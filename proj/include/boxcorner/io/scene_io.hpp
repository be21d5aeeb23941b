#pragma once

// On-disk dataset layout:
//   <dir>/manifest.json
//   <dir>/scene_XXXXXX/meta.txt          SceneMeta text record
//   <dir>/scene_XXXXXX/query.btns        u8 H x W x 3
//   <dir>/scene_XXXXXX/query_mask.btns   u8 H x W (silhouette, 0/1)
//   <dir>/scene_XXXXXX/ref_NN.btns, ref_NN_mask.btns
//   <dir>/scene_XXXXXX/cloud.btns        f64 N x 3

#include <cstdint>
#include <string>
#include <vector>

#include "boxcorner/train/scene.hpp"
#include "json.hpp"

namespace boxc {

void to_json(nlohmann::json& j, const GenConfig& c);
void from_json(const nlohmann::json& j, GenConfig& c);

}  // namespace boxc

namespace boxc::io {

// Text metadata: intrinsics (fx fy cx cy width height), pose (R row-major
// then t), mask rectangle (x0 y0 x1 y1) per view; 8 box corners; diameter;
// symmetric flag. Numbers are printed with %.17g so they round-trip exactly.
std::string format_scene_meta(const Scene& scene);
// Fills everything except images, silhouettes and the cloud; recomputes the
// ground-truth corners. Throws ErrorKind::Format naming `what`.
Scene parse_scene_meta(const std::string& text, const std::string& what);

std::string scene_dir_name(std::uint64_t index);

void save_scene(const std::string& dir, const Scene& scene);
Scene load_scene(const std::string& dir);

struct DatasetManifest {
  std::uint64_t seed = 0;
  std::uint64_t count = 0;
  GenConfig gen;
  std::vector<std::string> scenes;
};

void save_manifest(const std::string& dir, const DatasetManifest& m);
DatasetManifest load_manifest(const std::string& dir);

// Loads every scene listed in the manifest and validates it.
std::vector<Scene> load_dataset(const std::string& dir);

// Portable pixmap (binary P6).
std::string encode_ppm(const Image& img);
void save_ppm(const std::string& path, const Image& img);
Image decode_ppm(const std::string& bytes, const std::string& what);

}  // namespace boxc::io
