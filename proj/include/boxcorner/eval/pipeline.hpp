#pragma once

// Query-time pipeline: select references, predict the query corner heatmap,
// decode corners, recover the pose with PnP and score it.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "boxcorner/error.hpp"
#include "boxcorner/eval/metrics.hpp"
#include "boxcorner/heatmap.hpp"
#include "boxcorner/nn/model.hpp"
#include "boxcorner/pnp.hpp"
#include "boxcorner/train/scene.hpp"

namespace boxc {

enum class Selection { Fps, Neighbors, All };

Selection parse_selection(const std::string& name);
std::string to_string(Selection s);

struct EvalOptions {
  int n_refs = 5;
  Selection selection = Selection::Fps;
  double sigma_scale = kDefaultSigmaScale;
  DecodeOptions decode;
  PoseEstimateOptions pose;
  // Skip the network and decode the encoded ground-truth query heatmap.
  bool gt_heatmap_bypass = false;
  // Fraction of the query silhouette hidden by a synthetic occluder.
  double query_occlusion = 0.0;
  std::uint64_t seed = 0;
};

// Chosen reference indices, ascending. FPS / neighbor ranking / every view,
// then, if more remain than the model accepts, the most similar max_refs by
// feature cosine similarity.
std::vector<int> select_references(const Scene& scene, const nn::ModelParams<float>* params,
                                   const nn::ModelConfig& config, const EvalOptions& options);

struct Prediction {
  CornerHeatmapT<float> heatmap;
  DecodedCorners decoded;
  std::optional<RefinedPose> pose;
  std::string failure;  // set when pose recovery failed
  ErrorKind failure_kind = ErrorKind::NumericFailure;
  std::vector<int> references;
};

// Runs the network (or the bypass) on the scene's query. Pose recovery
// failures are captured in Prediction::failure.
Prediction predict(const Scene& scene, const nn::ModelParams<float>* params, const nn::ModelConfig& config,
                   const EvalOptions& options);

SceneResult score(const Scene& scene, const Prediction& prediction);

// Per-scene evaluation; `scenes` are not modified (occluders are applied to
// a copy).
MetricReport evaluate(std::span<const Scene> scenes, const nn::ModelParams<float>* params,
                      const nn::ModelConfig& config, const EvalOptions& options);

}  // namespace boxc
