#include "boxcorner/geom3d.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SVD>

#include "boxcorner/error.hpp"

namespace boxc {

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

bool Pose::is_valid(double tol) const {
  const Mat3 gram = rotation.transpose() * rotation;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  if (std::abs(rotation.determinant() - 1.0) > tol) return false;
  return rotation.allFinite() && translation.allFinite();
}

Mat3 rotation_from_axis_angle(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta < 1e-12) {
    // First-order expansion, re-orthonormalized.
    Mat3 m = Mat3::Identity();
    m(0, 1) = -omega.z();
    m(0, 2) = omega.y();
    m(1, 0) = omega.z();
    m(1, 2) = -omega.x();
    m(2, 0) = -omega.y();
    m(2, 1) = omega.x();
    return nearest_rotation(m);
  }
  return Eigen::AngleAxisd(theta, omega / theta).toRotationMatrix();
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const Mat3 rel = a.transpose() * b;
  // atan2 form stays accurate near zero where acos((tr - 1) / 2) does not.
  const Vec3 axis(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  const double s = 0.5 * axis.norm();
  const double c = 0.5 * (rel.trace() - 1.0);
  return std::atan2(s, c);
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Mat3 Intrinsics::matrix() const {
  Mat3 k = Mat3::Zero();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  k(2, 2) = 1.0;
  return k;
}

bool MaskBitmap::contains(const Vec2& p) const {
  const double xr = std::round(p.x());
  const double yr = std::round(p.y());
  if (!(xr >= 0 && yr >= 0 && xr < width && yr < height)) return false;
  return at(static_cast<int>(xr), static_cast<int>(yr));
}

DetectionMask::DetectionMask(Rect rect, int width, int height)
    : shape_(rect), width_(width), height_(height) {}

DetectionMask::DetectionMask(MaskBitmap bitmap)
    : shape_(std::move(bitmap)), width_(0), height_(0) {
  const auto& b = std::get<MaskBitmap>(shape_);
  if (b.bits.size() != static_cast<std::size_t>(b.width) * b.height)
    throw Error(ErrorKind::Shape, "mask bitmap size does not match its dimensions");
  width_ = b.width;
  height_ = b.height;
}

bool DetectionMask::contains(const Vec2& p) const {
  return std::visit([&](const auto& s) { return s.contains(p); }, shape_);
}

BoundingBox3D BoundingBox3D::from_extents(const Vec3& lo, const Vec3& hi) {
  BoundingBox3D box;
  for (int i = 0; i < kNumCorners; ++i) {
    box.corners[i] = Vec3((i & 4) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(),
                          (i & 1) ? hi.z() : lo.z());
  }
  return box;
}

Vec3 BoundingBox3D::center() const {
  Vec3 c = Vec3::Zero();
  for (const auto& p : corners) c += p;
  return c / kNumCorners;
}

const std::array<std::pair<int, int>, 12>& BoundingBox3D::edges() {
  // Pairs differing in exactly one bit.
  static const std::array<std::pair<int, int>, 12> kEdges = {{
      {0, 1}, {2, 3}, {4, 5}, {6, 7},  // z
      {0, 2}, {1, 3}, {4, 6}, {5, 7},  // y
      {0, 4}, {1, 5}, {2, 6}, {3, 7},  // x
  }};
  return kEdges;
}

std::optional<Vec2> try_project_point(const Pose& pose, const Intrinsics& k, const Vec3& p) {
  const Vec3 pc = pose.apply(p);
  if (!(pc.z() > 0.0)) return std::nullopt;
  return Vec2(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy);
}

Vec2 project_point(const Pose& pose, const Intrinsics& k, const Vec3& p) {
  auto uv = try_project_point(pose, k, p);
  if (!uv) throw Error(ErrorKind::BehindCamera, "point has non-positive camera depth");
  return *uv;
}

std::array<Vec2, kNumCorners> project_corners(const Pose& pose, const Intrinsics& k,
                                              const BoundingBox3D& box) {
  std::array<Vec2, kNumCorners> out;
  for (int i = 0; i < kNumCorners; ++i) {
    auto uv = try_project_point(pose, k, box.corners[i]);
    if (!uv)
      throw Error(ErrorKind::BehindCamera,
                  "box corner " + std::to_string(i) + " has non-positive camera depth");
    out[i] = *uv;
  }
  return out;
}

PointCloud filter_points(const PointCloud& cloud, std::span<const ViewObservation> views) {
  if (views.empty()) throw Error(ErrorKind::InvalidArgument, "filter_points needs at least one view");
  for (const auto& v : views) {
    if (v.mask.width() != v.intrinsics.width || v.mask.height() != v.intrinsics.height)
      throw Error(ErrorKind::Shape, "mask size does not match view intrinsics");
  }
  PointCloud out;
  for (const auto& p : cloud.points) {
    bool keep = true;
    for (const auto& v : views) {
      auto uv = try_project_point(v.pose, v.intrinsics, p);
      if (!uv || !v.mask.contains(*uv)) {
        keep = false;
        break;
      }
    }
    if (keep) out.points.push_back(p);
  }
  if (out.empty()) throw Error(ErrorKind::EmptyCloud, "no point survived mask filtering");
  return out;
}

FittedBox fit_bounding_box(const PointCloud& cloud) {
  if (cloud.empty()) throw Error(ErrorKind::DegenerateBox, "cannot fit a box to an empty cloud");
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : cloud.points) centroid += p;
  centroid /= static_cast<double>(cloud.size());

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : cloud.points) {
    const Vec3 q = p - centroid;
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  for (int a = 0; a < 3; ++a) {
    if (!(hi[a] - lo[a] >= 1e-12))
      throw Error(ErrorKind::DegenerateBox,
                  "point cloud extent along axis " + std::to_string(a) + " is degenerate");
  }
  return {BoundingBox3D::from_extents(lo, hi), centroid};
}

BoundingBox3D rotate_box(const BoundingBox3D& box, const Vec3& axis, double angle) {
  if (!axis.allFinite() || std::abs(axis.norm() - 1.0) > 1e-9)
    throw Error(ErrorKind::InvalidAxis, "rotation axis must be a unit vector");
  const Mat3 r = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  const Vec3 c = box.center();
  BoundingBox3D out;
  for (int i = 0; i < kNumCorners; ++i) out.corners[i] = c + r * (box.corners[i] - c);
  return out;
}

Intrinsics crop_intrinsics(const Intrinsics& k, const Rect& crop, int out_width, int out_height) {
  if (!(crop.width() > 0 && crop.height() > 0) || out_width < 1 || out_height < 1)
    throw Error(ErrorKind::InvalidCrop, "crop and output size must have positive area");
  if (crop.x0 < 0 || crop.y0 < 0 || crop.x1 > k.width || crop.y1 > k.height)
    throw Error(ErrorKind::InvalidCrop, "crop rectangle exceeds the image bounds");
  // Pixel centers sit at integer coordinates, so the resize maps
  // u' + 1/2 = (u + 1/2 - x0) * sx.
  const double sx = out_width / crop.width();
  const double sy = out_height / crop.height();
  Intrinsics out;
  out.fx = k.fx * sx;
  out.fy = k.fy * sy;
  out.cx = (k.cx + 0.5 - crop.x0) * sx - 0.5;
  out.cy = (k.cy + 0.5 - crop.y0) * sy - 0.5;
  out.width = out_width;
  out.height = out_height;
  return out;
}

}  // namespace boxc
