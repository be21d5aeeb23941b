#include "boxcorner/nn/config.hpp"

#include "boxcorner/error.hpp"

namespace boxc::nn {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, "model config: " + msg); };
  if (patch < 1) fail("patch size must be positive");
  if (image_height < 1 || image_width < 1) fail("image size must be positive");
  if (image_height % patch != 0 || image_width % patch != 0)
    fail("image size must be divisible by the patch size");
  if (channels < 1) fail("channel count must be positive");
  if (depth < 0) fail("depth must be non-negative");
  if (width < 1 || heads < 1 || width % heads != 0) fail("width must be divisible by heads");
  if (mlp_ratio < 1) fail("mlp ratio must be positive");
  if (min_refs < 1 || max_refs < min_refs) fail("reference range must satisfy 1 <= min <= max");
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::full_scale() {
  ModelConfig c;
  c.image_height = 224;
  c.image_width = 224;
  c.patch = 14;
  c.depth = 12;
  c.width = 768;
  c.heads = 8;
  c.min_refs = 1;
  c.max_refs = 15;
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"image_height", c.image_height}, {"image_width", c.image_width},
                     {"channels", c.channels},         {"patch", c.patch},
                     {"depth", c.depth},               {"width", c.width},
                     {"heads", c.heads},               {"mlp_ratio", c.mlp_ratio},
                     {"min_refs", c.min_refs},         {"max_refs", c.max_refs}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.image_height = j.value("image_height", d.image_height);
  c.image_width = j.value("image_width", d.image_width);
  c.channels = j.value("channels", d.channels);
  c.patch = j.value("patch", d.patch);
  c.depth = j.value("depth", d.depth);
  c.width = j.value("width", d.width);
  c.heads = j.value("heads", d.heads);
  c.mlp_ratio = j.value("mlp_ratio", d.mlp_ratio);
  c.min_refs = j.value("min_refs", d.min_refs);
  c.max_refs = j.value("max_refs", d.max_refs);
}

}  // namespace boxc::nn
