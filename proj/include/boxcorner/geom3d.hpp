#pragma once

// Rigid poses, pinhole projection, multiview point filtering and
// object bounding-box recovery.
//
// Pose convention throughout the library is camera-from-object:
//   p_cam = rotation * p_obj + translation
// and the camera looks down +z with x right and y down.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace boxc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Pose inverse() const;
  // (a * b).apply(p) == a.apply(b.apply(p))
  Pose operator*(const Pose& rhs) const;
  // Optical center in the object frame, -R^T t.
  Vec3 camera_center() const { return -rotation.transpose() * translation; }

  // Orthonormality and det(R) = +1 within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

// Rotation from an axis-angle vector (Rodrigues).
Mat3 rotation_from_axis_angle(const Vec3& omega);
// Geodesic angle between two rotations, radians.
double rotation_angle_between(const Mat3& a, const Mat3& b);
// Nearest rotation (Frobenius) to an arbitrary 3x3 matrix.
Mat3 nearest_rotation(const Mat3& m);

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  Mat3 matrix() const;
  bool is_valid() const { return fx > 0 && fy > 0 && width >= 1 && height >= 1; }
};

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains(const Vec2& p) const {
    return p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1;
  }
};

// Per-pixel object mask. Pixel (x, y) covers the unit square centered at the
// integer coordinate (x, y).
struct MaskBitmap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  bool contains(const Vec2& p) const;
};

class DetectionMask {
 public:
  DetectionMask(Rect rect, int width, int height);
  explicit DetectionMask(MaskBitmap bitmap);

  int width() const { return width_; }
  int height() const { return height_; }
  bool contains(const Vec2& p) const;
  bool is_rect() const { return std::holds_alternative<Rect>(shape_); }
  const Rect* rect() const { return std::get_if<Rect>(&shape_); }
  const MaskBitmap* bitmap() const { return std::get_if<MaskBitmap>(&shape_); }

 private:
  std::variant<Rect, MaskBitmap> shape_;
  int width_;
  int height_;
};

// Corner i has bit pattern (bx, by, bz) = ((i >> 2) & 1, (i >> 1) & 1, i & 1),
// each bit choosing min (0) or max (1) along its axis; z varies fastest.
inline constexpr int kNumCorners = 8;

struct BoundingBox3D {
  std::array<Vec3, kNumCorners> corners;

  static BoundingBox3D from_extents(const Vec3& lo, const Vec3& hi);
  Vec3 center() const;
  // The 12 edges as corner index pairs.
  static const std::array<std::pair<int, int>, 12>& edges();
};

struct ViewObservation {
  Pose pose;
  Intrinsics intrinsics;
  DetectionMask mask;
};

struct FittedBox {
  BoundingBox3D box;
  Vec3 centroid;
};

Vec2 project_point(const Pose& pose, const Intrinsics& k, const Vec3& p);
std::optional<Vec2> try_project_point(const Pose& pose, const Intrinsics& k, const Vec3& p);
std::array<Vec2, kNumCorners> project_corners(const Pose& pose, const Intrinsics& k,
                                              const BoundingBox3D& box);

// Keeps the points whose projection falls inside the mask of every view.
// Throws ErrorKind::EmptyCloud when nothing survives.
PointCloud filter_points(const PointCloud& cloud, std::span<const ViewObservation> views);

FittedBox fit_bounding_box(const PointCloud& cloud);

BoundingBox3D rotate_box(const BoundingBox3D& box, const Vec3& axis, double angle);

Intrinsics crop_intrinsics(const Intrinsics& k, const Rect& crop, int out_width, int out_height);

}  // namespace boxc
