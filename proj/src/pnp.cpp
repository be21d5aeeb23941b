#include "boxcorner/pnp.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "boxcorner/error.hpp"

namespace boxc {
namespace {

using Mat34 = Eigen::Matrix<double, 3, 4>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// Ratio of the smallest to the largest eigenvalue of the point scatter.
template <int D>
double spread_ratio(const std::vector<Eigen::Matrix<double, D, 1>>& pts,
                    const std::vector<double>& w) {
  using V = Eigen::Matrix<double, D, 1>;
  using M = Eigen::Matrix<double, D, D>;
  V mean = V::Zero();
  double sw = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    mean += w[i] * pts[i];
    sw += w[i];
  }
  mean /= sw;
  M cov = M::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const V d = pts[i] - mean;
    cov += w[i] * d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<M> es(cov);
  const auto ev = es.eigenvalues();
  if (!(ev(D - 1) > 0.0)) return 0.0;
  return std::max(ev(0), 0.0) / ev(D - 1);
}

Pose pose_from_projection(const Mat34& p) {
  const Mat3 m = p.leftCols<3>();
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1.0;
  Pose pose;
  pose.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  const double scale = svd.singularValues().mean();
  pose.translation = p.col(3) / scale;
  return pose;
}

struct Residuals {
  Eigen::VectorXd r;  // sqrt(w)-scaled, 2 per pair
  double cost = 0.0;
  bool ok = true;
};

Residuals evaluate(const Pose& pose, std::span<const Correspondence> pairs, const Intrinsics& k) {
  Residuals out;
  out.r.resize(2 * static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Vec3 pc = pose.apply(pairs[i].object);
    if (!(pc.z() > 0.0)) {
      out.ok = false;
      out.cost = std::numeric_limits<double>::infinity();
      return out;
    }
    const double sw = std::sqrt(pairs[i].weight);
    const double u = k.fx * pc.x() / pc.z() + k.cx;
    const double v = k.fy * pc.y() / pc.z() + k.cy;
    out.r(2 * i) = sw * (u - pairs[i].image.x());
    out.r(2 * i + 1) = sw * (v - pairs[i].image.y());
  }
  out.cost = out.r.squaredNorm();
  out.ok = std::isfinite(out.cost);
  return out;
}

double total_weight(std::span<const Correspondence> pairs) {
  double s = 0.0;
  for (const auto& c : pairs) s += c.weight;
  return s;
}

}  // namespace

Pose solve_pnp_dlt(std::span<const Correspondence> pairs, const Intrinsics& k) {
  const std::size_t n = pairs.size();
  if (n < 6)
    throw Error(ErrorKind::InsufficientCorrespondences, "DLT needs at least 6 correspondences");

  std::vector<Vec3> obj(n);
  std::vector<Vec2> img(n);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!pairs[i].object.allFinite() || !pairs[i].image.allFinite() || !(pairs[i].weight > 0.0))
      throw Error(ErrorKind::InvalidArgument, "correspondences must be finite with positive weight");
    obj[i] = pairs[i].object;
    img[i] = Vec2((pairs[i].image.x() - k.cx) / k.fx, (pairs[i].image.y() - k.cy) / k.fy);
    w[i] = pairs[i].weight;
  }
  if (spread_ratio<2>(img, w) < 1e-10)
    throw Error(ErrorKind::DegenerateConfiguration, "image points are collinear");
  if (spread_ratio<3>(obj, w) < 1e-10)
    throw Error(ErrorKind::DegenerateConfiguration, "object points are coplanar");

  Vec3 mean = Vec3::Zero();
  for (const auto& p : obj) mean += p;
  mean /= static_cast<double>(n);
  double scale = 0.0;
  for (const auto& p : obj) scale += (p - mean).norm();
  scale /= static_cast<double>(n);

  Eigen::MatrixXd a(2 * n, 12);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector4d x((obj[i] - mean).x() / scale, (obj[i] - mean).y() / scale,
                            (obj[i] - mean).z() / scale, 1.0);
    const double sw = std::sqrt(w[i]);
    const double u = img[i].x();
    const double v = img[i].y();
    a.row(2 * i) << sw * x.transpose(), Eigen::RowVector4d::Zero(), -sw * u * x.transpose();
    a.row(2 * i + 1) << Eigen::RowVector4d::Zero(), sw * x.transpose(), -sw * v * x.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(10) / sv(0) < 1e-10)
    throw Error(ErrorKind::DegenerateConfiguration, "DLT design matrix is rank deficient");

  const Eigen::VectorXd h = svd.matrixV().col(11);
  Mat34 pn;
  pn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8), h(9), h(10), h(11);
  // Undo the object-point normalization: P = Pn * [I/s, -m/s; 0, 1].
  Mat34 p;
  p.leftCols<3>() = pn.leftCols<3>() / scale;
  p.col(3) = pn.col(3) - pn.leftCols<3>() * mean / scale;
  if (p.leftCols<3>().determinant() < 0) p = -p;

  Pose pose = pose_from_projection(p);
  int in_front = 0;
  for (const auto& x : obj) in_front += pose.apply(x).z() > 0.0 ? 1 : 0;
  if (2 * in_front < static_cast<int>(n)) pose = pose_from_projection(-p);
  return pose;
}

double reprojection_rms(const Pose& pose, std::span<const Correspondence> pairs, const Intrinsics& k) {
  const Residuals r = evaluate(pose, pairs, k);
  if (!r.ok) return std::numeric_limits<double>::infinity();
  return std::sqrt(r.cost / total_weight(pairs));
}

RefinedPose refine_pnp_lm(const Pose& init, std::span<const Correspondence> pairs,
                          const Intrinsics& k, const LmOptions& opts) {
  if (pairs.size() < 4)
    throw Error(ErrorKind::InsufficientCorrespondences, "LM refinement needs at least 4 correspondences");
  const double wsum = total_weight(pairs);
  if (!(wsum > 0.0)) throw Error(ErrorKind::InvalidArgument, "correspondence weights sum to zero");

  Pose pose = init;
  Residuals cur = evaluate(pose, pairs, k);
  if (!cur.ok) throw Error(ErrorKind::NumericFailure, "non-finite reprojection residuals at LM start");

  RefinedPose out;
  out.initial_rms = std::sqrt(cur.cost / wsum);
  double lambda = -1.0;
  const Eigen::Index m = 2 * static_cast<Eigen::Index>(pairs.size());
  Eigen::Matrix<double, Eigen::Dynamic, 6> jac(m, 6);

  int it = 0;
  for (; it < opts.max_iterations && cur.cost > 0.0; ++it) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const Vec3 rx = pose.rotation * pairs[i].object;
      const Vec3 pc = rx + pose.translation;
      const double iz = 1.0 / pc.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0.0, -k.fx * pc.x() * iz * iz, 0.0, k.fy * iz, -k.fy * pc.y() * iz * iz;
      const double sw = std::sqrt(pairs[i].weight);
      jac.block<2, 3>(2 * i, 0) = sw * dproj * (-skew(rx));
      jac.block<2, 3>(2 * i, 3) = sw * dproj;
    }
    const Mat6 jtj = jac.transpose() * jac;
    const Vec6 g = jac.transpose() * cur.r;
    if (lambda < 0) lambda = 1e-3 * jtj.diagonal().maxCoeff();

    bool accepted = false;
    bool converged = false;
    while (!accepted) {
      Mat6 aug = jtj;
      aug.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Vec6 step = aug.ldlt().solve(-g);
      if (!step.allFinite()) throw Error(ErrorKind::NumericFailure, "LM produced a non-finite step");
      if (step.norm() < opts.step_tolerance) {
        converged = true;
        break;
      }
      Pose trial;
      trial.rotation = rotation_from_axis_angle(step.head<3>()) * pose.rotation;
      trial.translation = pose.translation + step.tail<3>();
      Residuals next = evaluate(trial, pairs, k);
      if (next.ok && next.cost < cur.cost) {
        const double rel = (cur.cost - next.cost) / cur.cost;
        pose = trial;
        cur = std::move(next);
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (rel < opts.relative_cost_tolerance) converged = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          converged = true;
          break;
        }
      }
    }
    if (accepted) out.iterations = it + 1;
    if (converged) break;
  }
  pose.rotation = nearest_rotation(pose.rotation);
  out.pose = pose;
  out.rms_reproj = reprojection_rms(pose, pairs, k);
  if (!(out.rms_reproj <= out.initial_rms)) {
    // Re-orthonormalization can nudge the cost by rounding; never return worse.
    out.pose = init;
    out.rms_reproj = out.initial_rms;
  }
  return out;
}

RefinedPose estimate_pose(const Corners2D& corners, const std::array<double, kNumCorners>& confidence,
                          const BoundingBox3D& box, const Intrinsics& k,
                          const PoseEstimateOptions& opts) {
  std::vector<Correspondence> pairs;
  for (int i = 0; i < kNumCorners; ++i) {
    if (!(confidence[i] >= opts.min_conf) || !corners.points[i].allFinite()) continue;
    const double w = opts.weight_by_confidence ? confidence[i] : 1.0;
    if (!(w > 0.0)) continue;
    pairs.push_back({box.corners[i], corners.points[i], w});
  }
  if (pairs.size() < 6)
    throw Error(ErrorKind::InsufficientCorrespondences,
                "only " + std::to_string(pairs.size()) + " corners reach confidence " +
                    std::to_string(opts.min_conf) + "; at least 6 are required");
  const Pose init = solve_pnp_dlt(pairs, k);
  return refine_pnp_lm(init, pairs, k, opts.lm);
}

}  // namespace boxc
