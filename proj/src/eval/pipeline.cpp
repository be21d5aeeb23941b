#include "boxcorner/eval/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "boxcorner/error.hpp"
#include "boxcorner/train/augment.hpp"

namespace boxc {
namespace {

nn::Tensor<double> image_features(const Image& img, const nn::ModelParams<float>& params,
                                  const nn::ModelConfig& config) {
  const nn::Tensor<float> f = nn::patch_embed(image_to_tensor<float>(img), params, config);
  nn::Tensor<double> out;
  out.shape = f.shape;
  out.data.assign(f.data.begin(), f.data.end());
  return out;
}

std::vector<int> rank_by_similarity(const Scene& scene, std::span<const int> candidates, int k,
                                    const nn::ModelParams<float>& params, const nn::ModelConfig& config) {
  const nn::Tensor<double> q = image_features(scene.query.image, params, config);
  std::vector<nn::Tensor<double>> feats;
  for (int i : candidates) feats.push_back(image_features(scene.references[i].image, params, config));
  const std::vector<int> order = select_neighbors(q, feats, k);
  std::vector<int> out;
  for (int o : order) out.push_back(candidates[o]);
  return out;
}

}  // namespace

Selection parse_selection(const std::string& name) {
  if (name == "fps") return Selection::Fps;
  if (name == "neighbors") return Selection::Neighbors;
  if (name == "all") return Selection::All;
  throw Error(ErrorKind::InvalidArgument, "unknown selection '" + name + "' (expected fps, neighbors or all)");
}

std::string to_string(Selection s) {
  switch (s) {
    case Selection::Fps: return "fps";
    case Selection::Neighbors: return "neighbors";
    case Selection::All: return "all";
  }
  return "?";
}

std::vector<int> select_references(const Scene& scene, const nn::ModelParams<float>* params,
                                   const nn::ModelConfig& config, const EvalOptions& options) {
  const int available = static_cast<int>(scene.references.size());
  if (options.n_refs < 1) throw Error(ErrorKind::InvalidArgument, "n_refs must be at least 1");
  if (available < 1) throw Error(ErrorKind::InvalidArgument, "scene has no reference views");
  std::vector<int> chosen;
  switch (options.selection) {
    case Selection::Fps: {
      if (options.n_refs > available)
        throw Error(ErrorKind::InvalidArgument, "insufficient references: requested " +
                                                    std::to_string(options.n_refs) + ", scene has " +
                                                    std::to_string(available));
      std::vector<Pose> poses;
      for (const auto& v : scene.references) poses.push_back(v.pose);
      chosen = fps_sample(poses, options.n_refs);
      break;
    }
    case Selection::Neighbors: {
      if (options.n_refs > available)
        throw Error(ErrorKind::InvalidArgument, "insufficient references: requested " +
                                                    std::to_string(options.n_refs) + ", scene has " +
                                                    std::to_string(available));
      if (!params) throw Error(ErrorKind::InvalidArgument, "neighbor selection needs model parameters");
      std::vector<int> all(available);
      for (int i = 0; i < available; ++i) all[i] = i;
      chosen = rank_by_similarity(scene, all, options.n_refs, *params, config);
      break;
    }
    case Selection::All:
      for (int i = 0; i < available; ++i) chosen.push_back(i);
      break;
  }
  if (static_cast<int>(chosen.size()) > config.max_refs) {
    if (!params) {
      chosen.resize(config.max_refs);
    } else {
      chosen = rank_by_similarity(scene, chosen, config.max_refs, *params, config);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

Prediction predict(const Scene& scene, const nn::ModelParams<float>* params, const nn::ModelConfig& config,
                   const EvalOptions& options) {
  Prediction out;
  const int w = scene.query.intrinsics.width, h = scene.query.intrinsics.height;
  if (options.gt_heatmap_bypass) {
    out.heatmap = encode_heatmap<float>(scene.gt_corners, h, w, options.sigma_scale);
  } else {
    if (!params) throw Error(ErrorKind::InvalidArgument, "network evaluation needs model parameters");
    out.references = select_references(scene, params, config, options);
    nn::ModelInput<float> input;
    for (int idx : out.references) {
      const View& v = scene.references[idx];
      const auto pts = project_corners(v.pose, v.intrinsics, scene.box);
      nn::ReferenceView<float> rv;
      rv.image = image_to_tensor<float>(v.image);
      rv.heatmap = encode_heatmap<float>(Corners2D::from_points(pts, v.intrinsics.width, v.intrinsics.height),
                                         v.intrinsics.height, v.intrinsics.width, options.sigma_scale);
      input.refs.push_back(std::move(rv));
    }
    input.query = image_to_tensor<float>(scene.query.image);
    out.heatmap = nn::forward(input, *params, config);
  }
  out.decoded = decode_corners(out.heatmap, options.decode);
  try {
    out.pose = estimate_pose(out.decoded.corners, out.decoded.confidence, scene.box, scene.query.intrinsics,
                             options.pose);
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::InsufficientCorrespondences:
      case ErrorKind::DegenerateConfiguration:
      case ErrorKind::NumericFailure:
        out.failure = e.what();
        out.failure_kind = e.kind();
        break;
      default:
        throw;
    }
  }
  return out;
}

SceneResult score(const Scene& scene, const Prediction& prediction) {
  SceneResult r;
  r.scene_id = scene.index;
  r.symmetric = scene.symmetric;
  r.diameter = scene.diameter;
  double corner_sum = 0.0;
  for (int c = 0; c < kNumCorners; ++c)
    corner_sum += (prediction.decoded.corners.points[c] - scene.gt_corners.points[c]).norm();
  r.corner_error = corner_sum / kNumCorners;
  if (!prediction.pose) return r;
  const Pose& pred = prediction.pose->pose;
  r.pose_ok = true;
  r.add = add_metric(scene.query.pose, pred, scene.cloud);
  r.adds = adds_metric(scene.query.pose, pred, scene.cloud);
  try {
    r.proj2d = proj2d_metric(scene.query.pose, pred, scene.cloud, scene.query.intrinsics);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::BehindCamera) throw;
    r.proj2d = std::numeric_limits<double>::infinity();
  }
  return r;
}

MetricReport evaluate(std::span<const Scene> scenes, const nn::ModelParams<float>* params,
                      const nn::ModelConfig& config, const EvalOptions& options) {
  MetricReport report;
  report.scenes.reserve(scenes.size());
  for (const Scene& scene : scenes) {
    if (options.query_occlusion > 0.0) {
      Scene occluded = scene;
      std::mt19937_64 rng(scene_seed(options.seed, scene.index));
      apply_occluder(occluded.query, options.query_occlusion, rng);
      report.scenes.push_back(score(occluded, predict(occluded, params, config, options)));
    } else {
      report.scenes.push_back(score(scene, predict(scene, params, config, options)));
    }
  }
  return report;
}

}  // namespace boxc
