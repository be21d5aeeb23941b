#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "boxcorner/geom3d.hpp"

namespace boxc::testing {

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(-std::numbers::pi, std::numbers::pi);
  return rotation_from_axis_angle(random_unit(rng) * a(rng));
}

// Object near the origin, camera looking at it from `min_z`..`max_z` away.
inline Pose random_pose(std::mt19937_64& rng, double min_z = 0.5, double max_z = 1.0) {
  std::uniform_real_distribution<double> z(min_z, max_z), xy(-0.05, 0.05);
  Pose p;
  p.rotation = random_rotation(rng);
  p.translation = Vec3(xy(rng), xy(rng), z(rng));
  return p;
}

inline Intrinsics desk_intrinsics(int size = 64, double f = 90.0) {
  Intrinsics k;
  k.fx = f;
  k.fy = f;
  k.cx = (size - 1) / 2.0;
  k.cy = (size - 1) / 2.0;
  k.width = size;
  k.height = size;
  return k;
}

inline BoundingBox3D random_box(std::mt19937_64& rng, double lo = 0.05, double hi = 0.15) {
  std::uniform_real_distribution<double> e(lo, hi);
  const Vec3 h(e(rng) / 2, e(rng) / 2, e(rng) / 2);
  return BoundingBox3D::from_extents(-h, h);
}

}  // namespace boxc::testing
