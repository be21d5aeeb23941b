#include "boxcorner/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "boxcorner/error.hpp"

namespace boxc {
namespace {

void require_points(const PointCloud& points, const char* what) {
  if (points.empty()) throw Error(ErrorKind::EmptyCloud, std::string(what) + ": empty point set");
}

std::string format_value(double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  if (std::isinf(hi) || std::isinf(lo)) return std::isinf(lo) ? lo : hi;
  return 0.5 * (lo + hi);
}

}  // namespace

double add_metric(const Pose& gt, const Pose& pred, const PointCloud& points) {
  require_points(points, "add_metric");
  double sum = 0.0;
  for (const auto& p : points.points) sum += (gt.apply(p) - pred.apply(p)).norm();
  return sum / static_cast<double>(points.size());
}

double adds_metric(const Pose& gt, const Pose& pred, const PointCloud& points) {
  require_points(points, "adds_metric");
  std::vector<Vec3> moved;
  moved.reserve(points.size());
  for (const auto& p : points.points) moved.push_back(pred.apply(p));
  double sum = 0.0;
  for (const auto& p : points.points) {
    const Vec3 g = gt.apply(p);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : moved) best = std::min(best, (g - q).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(points.size());
}

double proj2d_metric(const Pose& gt, const Pose& pred, const PointCloud& points, const Intrinsics& k) {
  require_points(points, "proj2d_metric");
  double sum = 0.0;
  for (const auto& p : points.points) sum += (project_point(gt, k, p) - project_point(pred, k, p)).norm();
  return sum / static_cast<double>(points.size());
}

double auc(std::span<const double> errors, double max_threshold) {
  if (errors.empty()) throw Error(ErrorKind::InvalidArgument, "auc: empty error list");
  if (!(max_threshold > 0.0)) throw Error(ErrorKind::InvalidArgument, "auc: threshold must be positive");
  // Each error e contributes the length of [e, T] on which it counts as a
  // success; the curve is the mean of these step functions.
  double sum = 0.0;
  for (double e : errors) {
    if (std::isnan(e) || e < 0.0) throw Error(ErrorKind::InvalidArgument, "auc: errors must be non-negative");
    if (e < max_threshold) sum += (max_threshold - e) / max_threshold;
  }
  return sum / static_cast<double>(errors.size());
}

std::vector<int> fps_sample(std::span<const Pose> poses, int k) {
  const int n = static_cast<int>(poses.size());
  if (k < 1 || k > n)
    throw Error(ErrorKind::InvalidArgument,
                "fps_sample: k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  std::vector<Vec3> centers;
  centers.reserve(n);
  for (const auto& p : poses) centers.push_back(p.camera_center());
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<int> chosen{0};
  std::vector<char> used(n, 0);
  used[0] = 1;
  while (static_cast<int>(chosen.size()) < k) {
    const Vec3& last = centers[chosen.back()];
    int best = -1;
    double best_d = -1.0;
    for (int i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], (centers[i] - last).norm());
      if (!used[i] && nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    used[best] = 1;
    chosen.push_back(best);
  }
  return chosen;
}

std::vector<double> mean_pool(const nn::Tensor<double>& feat) {
  const std::size_t d = feat.cols(), rows = feat.rows();
  if (d == 0 || rows == 0) throw Error(ErrorKind::InvalidFeature, "empty feature tensor");
  std::vector<double> out(d, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) out[j] += feat[r * d + j];
  for (auto& v : out) v /= static_cast<double>(rows);
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::Shape, "cosine_similarity: length mismatch");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (!(aa > 0.0) || !(bb > 0.0)) throw Error(ErrorKind::InvalidFeature, "zero-norm feature vector");
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

std::vector<int> select_neighbors(const nn::Tensor<double>& query_feat,
                                  std::span<const nn::Tensor<double>> ref_feats, int k) {
  const int n = static_cast<int>(ref_feats.size());
  if (k < 1 || k > n)
    throw Error(ErrorKind::InvalidArgument,
                "select_neighbors: k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  const std::vector<double> q = mean_pool(query_feat);
  std::vector<double> sim(n);
  for (int i = 0; i < n; ++i) sim[i] = cosine_similarity(q, mean_pool(ref_feats[i]));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sim[a] > sim[b]; });
  order.resize(k);
  return order;
}

double MetricReport::add_01d_rate() const {
  if (scenes.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& s : scenes) ok += s.add < 0.1 * s.diameter;
  return static_cast<double>(ok) / scenes.size();
}

double MetricReport::adds_01d_rate() const {
  if (scenes.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& s : scenes) ok += s.adds < 0.1 * s.diameter;
  return static_cast<double>(ok) / scenes.size();
}

double MetricReport::add_s_01d_rate() const {
  if (scenes.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& s : scenes) ok += s.add_s_pass();
  return static_cast<double>(ok) / scenes.size();
}

double MetricReport::proj2d_rate() const {
  if (scenes.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& s : scenes) ok += s.proj2d_pass();
  return static_cast<double>(ok) / scenes.size();
}

double MetricReport::add_auc(double max_threshold) const {
  if (scenes.empty()) return 0.0;
  std::vector<double> e;
  for (const auto& s : scenes) e.push_back(s.add);
  return auc(e, max_threshold);
}

double MetricReport::adds_auc(double max_threshold) const {
  if (scenes.empty()) return 0.0;
  std::vector<double> e;
  for (const auto& s : scenes) e.push_back(s.adds);
  return auc(e, max_threshold);
}

double MetricReport::median_corner_error() const {
  std::vector<double> e;
  for (const auto& s : scenes) e.push_back(s.corner_error);
  return median(e);
}

std::size_t MetricReport::failures() const {
  return static_cast<std::size_t>(std::count_if(scenes.begin(), scenes.end(), [](const auto& s) { return !s.pose_ok; }));
}

void MetricReport::write(std::ostream& out) const {
  out << "scene_id add adds proj2d add(s)_0.1d proj2d_5px corner_px\n";
  for (const auto& s : scenes) {
    out << s.scene_id << ' ' << format_value(s.add) << ' ' << format_value(s.adds) << ' '
        << format_value(s.proj2d) << ' ' << (s.add_s_pass() ? 1 : 0) << ' ' << (s.proj2d_pass() ? 1 : 0) << ' '
        << format_value(s.corner_error) << '\n';
  }
  out << "# scenes " << scenes.size() << '\n';
  out << "# failures " << failures() << '\n';
  out << "# add_0.1d " << format_value(add_01d_rate()) << '\n';
  out << "# adds_0.1d " << format_value(adds_01d_rate()) << '\n';
  out << "# add(s)_0.1d " << format_value(add_s_01d_rate()) << '\n';
  out << "# proj2d_5px " << format_value(proj2d_rate()) << '\n';
  out << "# add_auc " << format_value(add_auc()) << '\n';
  out << "# adds_auc " << format_value(adds_auc()) << '\n';
  out << "# median_corner_px " << format_value(median_corner_error()) << '\n';
}

std::string MetricReport::to_string() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

}  // namespace boxc
