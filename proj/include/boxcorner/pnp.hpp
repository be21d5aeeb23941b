#pragma once

#include <array>
#include <span>
#include <vector>

#include "boxcorner/geom3d.hpp"
#include "boxcorner/heatmap.hpp"

namespace boxc {

struct Correspondence {
  Vec3 object;
  Vec2 image;
  double weight = 1.0;
};

// Linear pose from >= 6 non-coplanar correspondences. Works in normalized
// camera coordinates with the 3D points centered and scaled.
Pose solve_pnp_dlt(std::span<const Correspondence> pairs, const Intrinsics& k);

struct LmOptions {
  int max_iterations = 100;
  double relative_cost_tolerance = 1e-12;
  double step_tolerance = 1e-12;
};

struct RefinedPose {
  Pose pose;
  double rms_reproj = 0.0;  // sqrt(sum w |e|^2 / sum w), pixels
  double initial_rms = 0.0;
  int iterations = 0;
};

// Weighted reprojection RMS; infinite when any point is behind the camera.
double reprojection_rms(const Pose& pose, std::span<const Correspondence> pairs, const Intrinsics& k);

// Levenberg-Marquardt on the weighted squared reprojection error. The pose is
// updated as R <- exp([w]x) R, t <- t + dt.
RefinedPose refine_pnp_lm(const Pose& init, std::span<const Correspondence> pairs,
                          const Intrinsics& k, const LmOptions& opts = {});

struct PoseEstimateOptions {
  double min_conf = 0.1;
  bool weight_by_confidence = true;
  LmOptions lm;
};

// Pairs every corner with confidence >= min_conf to its 3D box corner and runs
// DLT followed by LM.
RefinedPose estimate_pose(const Corners2D& corners, const std::array<double, kNumCorners>& confidence,
                          const BoundingBox3D& box, const Intrinsics& k,
                          const PoseEstimateOptions& opts = {});

}  // namespace boxc
