#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "boxcorner/geom3d.hpp"
#include "boxcorner/nn/tensor.hpp"

namespace boxc {

// Mean distance between corresponding transformed points, meters.
double add_metric(const Pose& gt, const Pose& pred, const PointCloud& points);

// Mean distance from each gt-transformed point to the nearest
// pred-transformed point, meters.
double adds_metric(const Pose& gt, const Pose& pred, const PointCloud& points);

// Mean pixel distance between the two projections of each point.
double proj2d_metric(const Pose& gt, const Pose& pred, const PointCloud& points, const Intrinsics& k);

inline constexpr double kDefaultAucThreshold = 0.10;

// Area under accuracy(t) = fraction of errors < t, integrated over
// [0, max_threshold] and divided by max_threshold. Infinite errors count as
// failures at every threshold.
double auc(std::span<const double> errors, double max_threshold = kDefaultAucThreshold);

// Greedy farthest-point sampling over camera optical centers, seeded with
// index 0; ties go to the lowest index.
std::vector<int> fps_sample(std::span<const Pose> poses, int k);

// Top-k references by cosine similarity of their mean-pooled features,
// descending, ties by lowest index. Features are (tokens x d) or any shape
// whose last extent is d.
std::vector<int> select_neighbors(const nn::Tensor<double>& query_feat,
                                  std::span<const nn::Tensor<double>> ref_feats, int k);
double cosine_similarity(std::span<const double> a, std::span<const double> b);
std::vector<double> mean_pool(const nn::Tensor<double>& feat);

struct SceneResult {
  std::uint64_t scene_id = 0;
  bool symmetric = false;
  double diameter = 0.0;
  double add = std::numeric_limits<double>::infinity();
  double adds = std::numeric_limits<double>::infinity();
  double proj2d = std::numeric_limits<double>::infinity();
  double corner_error = std::numeric_limits<double>::infinity();  // mean decoded-corner px error
  bool pose_ok = false;

  // ADD-S for symmetric objects, ADD otherwise.
  double add_s() const { return symmetric ? adds : add; }
  bool add_s_pass() const { return add_s() < 0.1 * diameter; }
  bool proj2d_pass() const { return proj2d < 5.0; }
};

struct MetricReport {
  std::vector<SceneResult> scenes;

  double add_01d_rate() const;   // ADD < 0.1 d over all scenes
  double adds_01d_rate() const;  // ADD-S < 0.1 d over all scenes
  double add_s_01d_rate() const; // ADD(S) per object symmetry
  double proj2d_rate() const;    // Proj2D < 5 px
  double add_auc(double max_threshold = kDefaultAucThreshold) const;
  double adds_auc(double max_threshold = kDefaultAucThreshold) const;
  double median_corner_error() const;
  std::size_t failures() const;

  // One row per scene then an aggregate footer. Deterministic formatting.
  void write(std::ostream& out) const;
  std::string to_string() const;
};

}  // namespace boxc
