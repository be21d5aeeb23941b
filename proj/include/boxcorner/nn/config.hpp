#pragma once

#include <string>

#include "json.hpp"

namespace boxc::nn {

struct ModelConfig {
  int image_height = 64;
  int image_width = 64;
  int channels = 3;
  int patch = 8;
  int depth = 2;
  int width = 64;
  int heads = 4;
  int mlp_ratio = 4;
  int min_refs = 1;
  int max_refs = 5;

  int grid_h() const { return image_height / patch; }
  int grid_w() const { return image_width / patch; }
  int tokens_per_view() const { return grid_h() * grid_w(); }
  int head_dim() const { return width / heads; }
  int heatmap_token_dim() const { return 8 * patch * patch; }
  int image_token_dim() const { return channels * patch * patch; }
  int sequence_length(int num_refs) const { return (num_refs + 1) * tokens_per_view(); }

  // Throws ErrorKind::Config on violated invariants.
  void validate() const;

  // Layout used by the network at desk scale versus the full-size network.
  static ModelConfig desk();
  static ModelConfig full_scale();
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace boxc::nn
