#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "boxcorner/error.hpp"
#include "boxcorner/eval/pipeline.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace boxc;
using boxc::testing::desk_intrinsics;
using boxc::testing::random_pose;
using boxc::testing::random_rotation;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, int n, double half = 0.08) {
  std::uniform_real_distribution<double> u(-half, half);
  PointCloud c;
  for (int i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

Pose perturbed(const Pose& p, std::mt19937_64& rng, double angle = 0.1, double shift = 0.01) {
  std::normal_distribution<double> n(0.0, 1.0);
  Pose q = p;
  q.rotation = rotation_from_axis_angle(Vec3(n(rng), n(rng), n(rng)).normalized() * angle) * p.rotation;
  q.translation += Vec3(n(rng), n(rng), n(rng)) * shift;
  return q;
}

double brute_adds(const Pose& gt, const Pose& pred, const PointCloud& pts) {
  double sum = 0.0;
  for (const auto& p : pts.points) {
    const Vec3 a = gt.apply(p);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : pts.points) best = std::min(best, (a - pred.apply(q)).norm());
    sum += best;
  }
  return sum / static_cast<double>(pts.size());
}

std::vector<int> greedy_fps(const std::vector<Vec3>& c, int k) {
  std::vector<int> out{0};
  while (static_cast<int>(out.size()) < k) {
    int best = -1;
    double best_d = -1.0;
    for (int i = 0; i < static_cast<int>(c.size()); ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (int j : out) d = std::min(d, (c[i] - c[j]).norm());
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    out.push_back(best);
  }
  return out;
}

nn::Tensor<double> feature(const std::vector<double>& v, int tokens = 1) {
  nn::Tensor<double> t({static_cast<std::size_t>(tokens), v.size()});
  for (int r = 0; r < tokens; ++r)
    for (std::size_t j = 0; j < v.size(); ++j) t.data[r * v.size() + j] = v[j];
  return t;
}

}  // namespace

TEST_CASE("add_metric examples and loop oracle") {
  std::mt19937_64 rng(1);
  const PointCloud pts = random_cloud(rng, 200);
  const Pose gt = random_pose(rng);
  CHECK(add_metric(gt, gt, pts) == 0.0);
  Pose shifted = gt;
  shifted.translation += Vec3(0.01, 0.0, 0.0);
  CHECK(add_metric(gt, shifted, pts) == doctest::Approx(0.01).epsilon(1e-12));
  for (int trial = 0; trial < 20; ++trial) {
    const Pose a = random_pose(rng), b = random_pose(rng);
    double sum = 0.0;
    for (const auto& p : pts.points)
      sum += ((a.rotation * p + a.translation) - (b.rotation * p + b.translation)).norm();
    CHECK(std::abs(add_metric(a, b, pts) - sum / 200.0) < 1e-12);
  }
  CHECK_THROWS_AS(add_metric(gt, gt, PointCloud{}), Error);
}

TEST_CASE("adds_metric equals the brute-force oracle exactly") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const PointCloud pts = random_cloud(rng, 20 + trial % 40);
    const Pose gt = random_pose(rng);
    const Pose pred = perturbed(gt, rng);
    CHECK(adds_metric(gt, pred, pts) == brute_adds(gt, pred, pts));
  }
  CHECK_THROWS_AS(adds_metric(Pose{}, Pose{}, PointCloud{}), Error);
}

TEST_CASE("adds_metric of a cube under a symmetry rotation is zero") {
  const auto cube = BoundingBox3D::from_extents(Vec3(-0.05, -0.05, -0.05), Vec3(0.05, 0.05, 0.05));
  PointCloud pts;
  for (const auto& c : cube.corners) pts.points.push_back(c);
  std::mt19937_64 rng(3);
  const Pose gt = random_pose(rng);
  Pose pred = gt;
  pred.rotation = gt.rotation * rotation_from_axis_angle(Vec3(0, 0, 1) * (M_PI / 2));
  CHECK(adds_metric(gt, pred, pts) < 1e-12);
  CHECK(add_metric(gt, pred, pts) > 0.01);
}

TEST_CASE("add is never below adds") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const PointCloud pts = random_cloud(rng, 30);
    const Pose gt = random_pose(rng);
    const Pose pred = trial % 2 ? random_pose(rng) : perturbed(gt, rng);
    CHECK(add_metric(gt, pred, pts) >= adds_metric(gt, pred, pts));
  }
}

TEST_CASE("proj2d_metric examples and loop oracle") {
  std::mt19937_64 rng(5);
  const Intrinsics k = desk_intrinsics();
  const PointCloud pts = random_cloud(rng, 200, 0.05);
  const Pose gt = random_pose(rng, 0.6, 0.8);
  CHECK(proj2d_metric(gt, gt, pts, k) == 0.0);

  // One off-axis point pushed along the optical axis: pixel offset scales as 1/z.
  PointCloud one;
  one.points.emplace_back(0.02, 0.0, 0.0);
  Pose near;
  near.translation = Vec3(0, 0, 0.5);
  Pose far = near;
  far.translation.z() = 1.0;
  CHECK(proj2d_metric(near, far, one, k) == doctest::Approx(k.fx * 0.02 * (1 / 0.5 - 1 / 1.0)).epsilon(1e-12));

  for (int trial = 0; trial < 20; ++trial) {
    const Pose pred = perturbed(gt, rng, 0.05, 0.005);
    double sum = 0.0;
    for (const auto& p : pts.points) {
      const Vec3 a = gt.rotation * p + gt.translation, b = pred.rotation * p + pred.translation;
      const Vec2 pa(k.fx * a.x() / a.z() + k.cx, k.fy * a.y() / a.z() + k.cy);
      const Vec2 pb(k.fx * b.x() / b.z() + k.cx, k.fy * b.y() / b.z() + k.cy);
      sum += (pa - pb).norm();
    }
    CHECK(std::abs(proj2d_metric(gt, pred, pts, k) - sum / 200.0) < 1e-12);
  }

  Pose behind = gt;
  behind.translation.z() = -1.0;
  CHECK_THROWS_AS(proj2d_metric(gt, behind, pts, k), Error);
}

TEST_CASE("metrics are invariant to a common change of object frame") {
  std::mt19937_64 rng(6);
  const Intrinsics k = desk_intrinsics();
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud pts = random_cloud(rng, 50, 0.05);
    const Pose gt = random_pose(rng, 0.6, 0.8);
    const Pose pred = perturbed(gt, rng, 0.05, 0.005);
    Pose g;
    g.rotation = random_rotation(rng);
    g.translation = Vec3(0.01, -0.02, 0.005);
    PointCloud moved;
    for (const auto& p : pts.points) moved.points.push_back(g.apply(p));
    const Pose gt2 = gt * g.inverse(), pred2 = pred * g.inverse();
    CHECK(add_metric(gt2, pred2, moved) == doctest::Approx(add_metric(gt, pred, pts)).epsilon(1e-9));
    CHECK(adds_metric(gt2, pred2, moved) == doctest::Approx(adds_metric(gt, pred, pts)).epsilon(1e-9));
    CHECK(proj2d_metric(gt2, pred2, moved, k) == doctest::Approx(proj2d_metric(gt, pred, pts, k)).epsilon(1e-9));
    // A rigid motion of the camera frame keeps the 3D metrics.
    Pose c;
    c.rotation = random_rotation(rng);
    c.translation = Vec3(0.3, 0.1, -0.2);
    CHECK(add_metric(c * gt, c * pred, pts) == doctest::Approx(add_metric(gt, pred, pts)).epsilon(1e-9));
    CHECK(adds_metric(c * gt, c * pred, pts) == doctest::Approx(adds_metric(gt, pred, pts)).epsilon(1e-9));
  }
}

TEST_CASE("auc examples and dense-grid oracle") {
  const std::vector<double> zeros(10, 0.0);
  CHECK(auc(zeros) == 1.0);
  CHECK(auc(zeros, 0.5) == 1.0);
  const std::vector<double> big{0.2, 0.3, std::numeric_limits<double>::infinity()};
  CHECK(auc(big) == 0.0);
  CHECK_THROWS_AS(auc(std::vector<double>{}), Error);
  CHECK_THROWS_AS(auc(zeros, 0.0), Error);

  std::vector<double> errs;
  for (int i = 1; i <= 37; ++i) errs.push_back(0.1 * i / 38.0);
  errs.push_back(std::numeric_limits<double>::infinity());
  errs.push_back(0.25);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 0.12);
  for (int i = 0; i < 20; ++i) errs.push_back(u(rng));
  const int n = 1000000;
  double grid = 0.0;
  for (int s = 0; s < n; ++s) {
    const double t = 0.1 * (s + 0.5) / n;
    grid += static_cast<double>(std::count_if(errs.begin(), errs.end(), [&](double e) { return e < t; })) /
            static_cast<double>(errs.size());
  }
  grid /= n;
  CHECK(std::abs(auc(errs) - grid) < 1e-6);
}

TEST_CASE("un-normalized auc is monotone in the threshold") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 0.2);
  std::vector<double> errs(50);
  for (auto& e : errs) e = u(rng);
  double prev = 0.0;
  for (double t = 0.01; t <= 0.3; t += 0.01) {
    const double area = auc(errs, t) * t;
    CHECK(area >= prev - 1e-15);
    prev = area;
  }
}

TEST_CASE("fps_sample examples and greedy oracle") {
  auto at = [](double x) {
    Pose p;
    p.translation = Vec3(-x, 0, 0);  // optical center -R^T t = (x, 0, 0)
    return p;
  };
  const std::vector<Pose> line{at(0), at(1), at(10)};
  CHECK(fps_sample(line, 1) == std::vector<int>{0});
  CHECK(fps_sample(line, 2) == std::vector<int>{0, 2});
  CHECK_THROWS_AS(fps_sample(line, 0), Error);
  CHECK_THROWS_AS(fps_sample(line, 4), Error);

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Pose> poses;
    std::vector<Vec3> centers;
    for (int i = 0; i < 50; ++i) {
      poses.push_back(random_pose(rng));
      centers.push_back(poses.back().camera_center());
    }
    const int k = 1 + trial % 15;
    const auto got = fps_sample(poses, k);
    CHECK(got == greedy_fps(centers, k));
    CHECK(got.front() == 0);
    auto sorted = got;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  }
}

TEST_CASE("fps_sample breaks ties by the lowest index") {
  auto at = [](double x, double y) {
    Pose p;
    p.translation = Vec3(-x, -y, 0);
    return p;
  };
  const std::vector<Pose> poses{at(0, 0), at(1, 0), at(-1, 0), at(0, 1)};
  CHECK(fps_sample(poses, 2) == std::vector<int>{0, 1});
  CHECK(fps_sample(poses, 3) == std::vector<int>{0, 1, 2});
}

TEST_CASE("select_neighbors examples and sort oracle") {
  const auto q = feature({1.0, 0.0, 0.0}, 3);
  const std::vector<nn::Tensor<double>> refs{feature({0.0, 1.0, 0.0}), feature({0.2, 0.1, 0.0}),
                                             feature({1.0, 0.0, 0.0}, 2)};
  CHECK(cosine_similarity(mean_pool(q), mean_pool(refs[2])) == doctest::Approx(1.0));
  CHECK(cosine_similarity(mean_pool(q), mean_pool(refs[0])) == 0.0);
  CHECK(select_neighbors(q, refs, 3) == std::vector<int>{2, 1, 0});
  CHECK(select_neighbors(q, refs, 1) == std::vector<int>{2});
  const std::vector<nn::Tensor<double>> zero{feature({0.0, 0.0, 0.0})};
  CHECK_THROWS_AS(select_neighbors(q, zero, 1), Error);
  CHECK_THROWS_AS(select_neighbors(q, refs, 4), Error);

  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    nn::Tensor<double> query({4, 6});
    for (auto& v : query.data) v = n(rng);
    std::vector<nn::Tensor<double>> rs;
    for (int i = 0; i < 20; ++i) {
      nn::Tensor<double> t({4, 6});
      for (auto& v : t.data) v = n(rng);
      rs.push_back(t);
    }
    auto pool = [](const nn::Tensor<double>& t) {
      std::vector<double> m(6, 0.0);
      for (int r = 0; r < 4; ++r)
        for (int j = 0; j < 6; ++j) m[j] += t.data[r * 6 + j] / 4.0;
      return m;
    };
    auto cos = [](const std::vector<double>& a, const std::vector<double>& b) {
      double ab = 0, aa = 0, bb = 0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
      }
      return ab / std::sqrt(aa * bb);
    };
    const auto qm = pool(query);
    std::vector<int> order(20);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> sims;
    for (const auto& r : rs) sims.push_back(cos(qm, pool(r)));
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sims[a] > sims[b]; });
    order.resize(5);
    CHECK(select_neighbors(query, rs, 5) == order);
  }
}

TEST_CASE("metric report aggregates and formatting") {
  MetricReport r;
  SceneResult a;
  a.scene_id = 0;
  a.diameter = 0.2;
  a.add = 0.01;
  a.adds = 0.005;
  a.proj2d = 2.0;
  a.corner_error = 1.0;
  a.pose_ok = true;
  SceneResult b = a;
  b.scene_id = 1;
  b.symmetric = true;
  b.add = 0.05;
  b.adds = 0.01;
  b.proj2d = 7.0;
  b.corner_error = 3.0;
  SceneResult c;
  c.scene_id = 2;
  c.diameter = 0.2;
  r.scenes = {a, b, c};
  CHECK(r.add_01d_rate() == doctest::Approx(1.0 / 3));
  CHECK(r.adds_01d_rate() == doctest::Approx(2.0 / 3));
  CHECK(r.add_s_01d_rate() == doctest::Approx(2.0 / 3));
  CHECK(r.proj2d_rate() == doctest::Approx(1.0 / 3));
  CHECK(r.failures() == 1);
  CHECK(r.median_corner_error() == 3.0);
  CHECK(r.add_auc() >= 0.0);
  CHECK(r.add_auc() <= 1.0);
  const std::string text = r.to_string();
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("scene_id add adds proj2d", 0) == 0);
  CHECK(text.find("inf") != std::string::npos);
  CHECK(text == r.to_string());
}

TEST_CASE("selection modes") {
  CHECK(parse_selection("fps") == Selection::Fps);
  CHECK(parse_selection("neighbors") == Selection::Neighbors);
  CHECK(parse_selection("all") == Selection::All);
  CHECK_THROWS_AS(parse_selection("random"), Error);
  CHECK(to_string(Selection::Neighbors) == "neighbors");

  GenConfig g;
  const Scene s = generate_scene(5, 0, g);
  const auto cfg = nn::ModelConfig::desk();
  const auto params = nn::init_params<float>(cfg, 0);
  EvalOptions o;
  o.n_refs = 3;
  o.selection = Selection::Fps;
  std::vector<Pose> poses;
  for (const auto& r : s.references) poses.push_back(r.pose);
  auto expect = fps_sample(poses, 3);
  std::sort(expect.begin(), expect.end());
  CHECK(select_references(s, &params, cfg, o) == expect);
  o.selection = Selection::Neighbors;
  const auto nb = select_references(s, &params, cfg, o);
  CHECK(nb.size() == 3);
  CHECK(std::is_sorted(nb.begin(), nb.end()));
  o.selection = Selection::All;
  CHECK(static_cast<int>(select_references(s, &params, cfg, o).size()) ==
        std::min<int>(cfg.max_refs, static_cast<int>(s.references.size())));
}

TEST_CASE("bypass pipeline recovers the pose on synthetic scenes") {
  GenConfig g;
  std::vector<Scene> scenes;
  for (int i = 0; i < 20; ++i) scenes.push_back(generate_scene(12, i, g));
  EvalOptions o;
  o.gt_heatmap_bypass = true;
  const auto report = evaluate(scenes, nullptr, nn::ModelConfig::desk(), o);
  CHECK(report.scenes.size() == 20);
  CHECK(report.add_s_01d_rate() == 1.0);
  CHECK(report.proj2d_rate() == 1.0);
  CHECK(report.median_corner_error() < 0.25);
}

TEST_CASE("pose failures score as infinite errors and are kept") {
  GenConfig g;
  std::vector<Scene> scenes{generate_scene(13, 0, g), generate_scene(13, 1, g)};
  EvalOptions o;
  o.gt_heatmap_bypass = true;
  o.pose.min_conf = 1.5;
  const auto report = evaluate(scenes, nullptr, nn::ModelConfig::desk(), o);
  REQUIRE(report.scenes.size() == 2);
  CHECK(report.failures() == 2);
  CHECK(std::isinf(report.scenes[0].add));
  CHECK(report.add_s_01d_rate() == 0.0);
}

TEST_CASE("occluded evaluation completes without touching the input scenes") {
  GenConfig g;
  std::vector<Scene> scenes{generate_scene(14, 0, g), generate_scene(14, 1, g), generate_scene(14, 2, g)};
  const auto before = scenes[0].query.image.rgb;
  const auto cfg = nn::ModelConfig::desk();
  const auto params = nn::init_params<float>(cfg, 0);
  EvalOptions o;
  o.query_occlusion = 0.25;
  const auto report = evaluate(scenes, &params, cfg, o);
  CHECK(report.scenes.size() == 3);
  CHECK(scenes[0].query.image.rgb == before);
  const auto again = evaluate(scenes, &params, cfg, o);
  CHECK(again.to_string() == report.to_string());
}
