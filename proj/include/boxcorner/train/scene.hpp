#pragma once

// Synthetic posed-cuboid scenes: a query view, posed reference views with
// silhouettes, the object's surface point cloud and its fitted 3D box. All
// poses and points are expressed in the object-centric frame (origin at the
// point-cloud centroid).

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "boxcorner/geom3d.hpp"
#include "boxcorner/heatmap.hpp"
#include "boxcorner/nn/tensor.hpp"

namespace boxc {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // H x W x 3

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}
  std::uint8_t* pixel(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
};

// Network input normalization: (v / 255 - 0.5) / 0.25.
template <class T>
nn::Tensor<T> image_to_tensor(const Image& img);

struct View {
  Image image;
  Pose pose;
  Intrinsics intrinsics;
  MaskBitmap silhouette;
  Rect mask_rect;  // detection rectangle

  DetectionMask detection() const { return DetectionMask(mask_rect, intrinsics.width, intrinsics.height); }
};

struct Scene {
  std::uint64_t index = 0;
  View query;
  std::vector<View> references;
  PointCloud cloud;
  BoundingBox3D box;
  Corners2D gt_corners;
  double diameter = 0.0;
  bool symmetric = false;
};

// Recomputes gt_corners from the current box and query pose.
void refresh_ground_truth(Scene& scene);

// Checks the scene invariants: valid poses, gt corners consistent with the box
// within `tol` px, masks inside the image. Throws ErrorKind::Format.
void validate_scene(const Scene& scene, double tol = 1e-6);

struct GenConfig {
  int image_width = 64;
  int image_height = 64;
  double focal = 90.0;
  double min_distance = 0.5;
  double max_distance = 0.8;
  double min_edge = 0.06;
  double max_edge = 0.14;
  int min_refs = 8;
  int max_refs = 8;
  double symmetric_prob = 0.2;
  double target_jitter = 0.01;
  double roll_jitter = 0.35;
  // Camera elevation above the object's xy plane, in degrees. The full range
  // [-90, 90] samples directions uniformly on the sphere.
  double min_elevation = -90.0;
  double max_elevation = 90.0;
  int cloud_points_per_face = 48;
  double cloud_noise = 0.0;
  double corner_margin = 2.0;  // every box corner stays this far inside every image

  void validate() const;
};

std::uint64_t scene_seed(std::uint64_t seed, std::uint64_t index);

// Deterministic for a given (rng state, config).
Scene generate_scene(std::mt19937_64& rng, const GenConfig& config);
Scene generate_scene(std::uint64_t seed, std::uint64_t index, const GenConfig& config);

// Renders the object-centric cuboid `box` into `view` (painter's algorithm
// with back-face culling) with the face appearance drawn from rng.
struct CuboidAppearance {
  std::array<std::array<double, 3>, 6> color;
  std::array<int, 6> pattern;
  std::array<double, 6> frequency;
  std::array<double, 3> background;
};
CuboidAppearance sample_appearance(std::mt19937_64& rng);
void render_cuboid(const BoundingBox3D& box, const CuboidAppearance& look, View& view);

// Max pairwise distance of the point set.
double point_set_diameter(const PointCloud& cloud);

}  // namespace boxc
