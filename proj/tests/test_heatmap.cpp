#include <cmath>
#include <random>

#include "boxcorner/error.hpp"
#include "boxcorner/heatmap.hpp"
#include "doctest.h"

using namespace boxc;

namespace {

Corners2D all_at(double x, double y, int w = 64, int h = 64) {
  std::array<Vec2, kNumCorners> pts;
  pts.fill(Vec2(x, y));
  return Corners2D::from_points(pts, w, h);
}

Corners2D ring_of_corners(Vec2 c, double radius) {
  std::array<Vec2, kNumCorners> pts;
  for (int i = 0; i < kNumCorners; ++i) {
    const double a = 2 * M_PI * i / kNumCorners;
    pts[i] = c + radius * Vec2(std::cos(a), std::sin(a));
  }
  return Corners2D::from_points(pts, 64, 64);
}

}  // namespace

TEST_CASE("object_sigma examples") {
  CHECK(object_sigma(ring_of_corners(Vec2(30, 30), 10.0)) == doctest::Approx(1.0).epsilon(1e-12));

  std::array<Vec2, kNumCorners> sq;
  const Vec2 base[4] = {Vec2(10, 10), Vec2(30, 10), Vec2(10, 30), Vec2(30, 30)};
  for (int i = 0; i < kNumCorners; ++i) sq[i] = base[i % 4];
  CHECK(object_sigma(Corners2D::from_points(sq, 64, 64)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(10, 50);
  std::array<Vec2, kNumCorners> pts, twice;
  for (auto& p : pts) p = Vec2(u(rng), u(rng));
  Vec2 c = Vec2::Zero();
  for (auto& p : pts) c += p / 8.0;
  for (int i = 0; i < kNumCorners; ++i) twice[i] = c + 2 * (pts[i] - c);
  CHECK(object_sigma(Corners2D::from_points(twice, 64, 64)) ==
        doctest::Approx(2 * object_sigma(Corners2D::from_points(pts, 64, 64))).epsilon(1e-12));

  CHECK_THROWS_AS(object_sigma(all_at(5, 5)), Error);
  CHECK_THROWS_AS(encode_heatmap<double>(all_at(5, 5), 64, 64), Error);
}

TEST_CASE("encode matches the pointwise formula") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-5, 70);
  std::array<Vec2, kNumCorners> pts;
  for (auto& p : pts) p = Vec2(u(rng), u(rng));
  const Corners2D c = Corners2D::from_points(pts, 64, 64);
  const double sigma = object_sigma(c);
  const auto h = encode_heatmap<double>(c, 64, 64);
  double worst = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int i = 0; i < kNumCorners; ++i) {
        const double d = std::hypot(x - pts[i].x(), y - pts[i].y());
        worst = std::max(worst, std::abs(h.at(y, x, i) - std::exp(-d / (2 * sigma * sigma))));
        CHECK(h.at(y, x, i) >= 0.0);
        CHECK(h.at(y, x, i) <= 1.0);
      }
  CHECK(worst < 1e-12);
}

TEST_CASE("encode hits 1 at the corner and 1/e at d = 2 sigma^2") {
  const double sigma = 2.0;
  std::array<Vec2, kNumCorners> pts;
  pts.fill(Vec2(20, 30));
  const auto h = encode_heatmap_with_sigma<double>(Corners2D::from_points(pts, 64, 64), 64, 64, sigma);
  CHECK(h.at(30, 20, 3) == 1.0);
  // 2 sigma^2 = 8 pixels to the right.
  CHECK(h.at(30, 28, 3) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
}

TEST_CASE("encode is translation-equivariant for integer shifts") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(10, 40);
  std::array<Vec2, kNumCorners> pts, moved;
  // Dyadic coordinates keep the shifted corners exactly representable.
  for (auto& p : pts) p = Vec2(std::round(u(rng) * 256) / 256, std::round(u(rng) * 256) / 256);
  const int dx = 5, dy = -3;
  for (int i = 0; i < kNumCorners; ++i) moved[i] = pts[i] + Vec2(dx, dy);
  const auto a = encode_heatmap_with_sigma<double>(Corners2D::from_points(pts, 64, 64), 64, 64, 2.5);
  const auto b = encode_heatmap_with_sigma<double>(Corners2D::from_points(moved, 64, 64), 64, 64, 2.5);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const int x2 = x + dx, y2 = y + dy;
      if (x2 < 0 || x2 >= 64 || y2 < 0 || y2 >= 64) continue;
      for (int i = 0; i < kNumCorners; ++i) CHECK(a.at(y, x, i) == b.at(y2, x2, i));
    }
}

TEST_CASE("encode decays monotonically along rays") {
  const auto h = encode_heatmap_with_sigma<double>(all_at(31.3, 30.6), 64, 64, 3.0);
  for (int x = 32; x < 63; ++x) CHECK(h.at(31, x + 1, 0) <= h.at(31, x, 0));
  for (int y = 31; y < 63; ++y) CHECK(h.at(y + 1, 31, 5) <= h.at(y, 31, 5));
  for (int k = 1; k < 30; ++k) CHECK(h.at(31 - k - 1, 31 - k - 1, 2) <= h.at(31 - k, 31 - k, 2));
}

TEST_CASE("visibility follows the image bounds") {
  std::array<Vec2, kNumCorners> pts;
  pts.fill(Vec2(10, 10));
  pts[1] = Vec2(-0.6, 10);
  pts[2] = Vec2(63.6, 10);
  pts[3] = Vec2(-0.5, 63.4);
  const Corners2D c = Corners2D::from_points(pts, 64, 64);
  CHECK(c.visible[0]);
  CHECK_FALSE(c.visible[1]);
  CHECK_FALSE(c.visible[2]);
  CHECK(c.visible[3]);
}

TEST_CASE("decode a single-pixel spike") {
  CornerHeatmapT<double> h(64, 64);
  for (int c = 0; c < kNumCorners; ++c) h.at(20, 10, c) = 1.0;
  const auto d = decode_corners(h);
  for (int c = 0; c < kNumCorners; ++c) {
    CHECK(d.corners.points[c].x() == 10.0);
    CHECK(d.corners.points[c].y() == 20.0);
    CHECK(d.confidence[c] == 1.0);
    CHECK(d.corners.visible[c]);
  }
}

TEST_CASE("decode a constant or empty channel falls back to the image center") {
  CornerHeatmapT<double> h(48, 64);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) h.at(y, x, 2) = 0.4;
  const auto d = decode_corners(h);
  CHECK(d.corners.points[2].x() == doctest::Approx(31.5));
  CHECK(d.corners.points[2].y() == doctest::Approx(23.5));
  CHECK_FALSE(d.corners.visible[2]);
  CHECK(d.corners.points[0].x() == doctest::Approx(31.5));
  CHECK_FALSE(d.corners.visible[0]);
  CHECK(d.confidence[0] == 0.0);
}

TEST_CASE("decode breaks argmax ties by the smallest row-major index") {
  CornerHeatmapT<double> h(32, 32);
  h.at(10, 20, 0) = 0.8;
  h.at(10, 5, 0) = 0.8;
  h.at(20, 2, 0) = 0.8;
  const CornerPeak p = locate_corner(h, 0);
  CHECK(p.argmax_x == 5);
  CHECK(p.argmax_y == 10);
}

TEST_CASE("decode argmax is invariant to positive channel scaling") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  CornerHeatmapT<double> h(32, 32);
  for (auto& v : h.values) v = u(rng);
  CornerHeatmapT<double> s = h;
  for (auto& v : s.values) v *= 0.37;
  for (int c = 0; c < kNumCorners; ++c) {
    const CornerPeak a = locate_corner(h, c), b = locate_corner(s, c);
    CHECK(a.argmax_x == b.argmax_x);
    CHECK(a.argmax_y == b.argmax_y);
    CHECK(a.x == doctest::Approx(b.x).epsilon(1e-12));
  }
}

TEST_CASE("decode round-trips a fixed corner") {
  for (double sigma : {1.5, 3.0, 8.0}) {
    const auto h = encode_heatmap_with_sigma<double>(all_at(32.40, 17.75), 64, 64, sigma);
    const auto d = decode_corners(h);
    for (int c = 0; c < kNumCorners; ++c) {
      CHECK(std::abs(d.corners.points[c].x() - 32.40) < 0.25);
      CHECK(std::abs(d.corners.points[c].y() - 17.75) < 0.25);
    }
  }
}

TEST_CASE("decode round-trip property on random corners") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> s(1.5, 8.0);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const double sigma = s(rng);
    std::uniform_real_distribution<double> pos(3 * sigma, 63 - 3 * sigma);
    std::array<Vec2, kNumCorners> pts;
    for (auto& p : pts) p = Vec2(pos(rng), pos(rng));
    const auto h = encode_heatmap_with_sigma<double>(Corners2D::from_points(pts, 64, 64), 64, 64, sigma);
    const auto d = decode_corners(h);
    for (int c = 0; c < kNumCorners; ++c)
      worst = std::max(worst, (d.corners.points[c] - pts[c]).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 0.25);
}

TEST_CASE("plain windowed centroid is biased toward the window center") {
  // The ring-subtracted weights are what keeps the round trip inside 0.25 px.
  const auto h = encode_heatmap_with_sigma<double>(all_at(30.49, 30.49), 64, 64, 8.0);
  DecodeOptions plain;
  plain.subtract_ring = false;
  const double biased = locate_corner(h, 0, plain).x;
  const double fixed = locate_corner(h, 0).x;
  CHECK(std::abs(fixed - 30.49) < std::abs(biased - 30.49));
}

TEST_CASE("full-map soft-argmax ablation returns the global centroid") {
  CornerHeatmapT<double> h(16, 16);
  h.at(2, 3, 0) = 1.0;
  h.at(12, 13, 0) = 1.0;
  DecodeOptions full;
  full.full_map = true;
  const CornerPeak p = locate_corner(h, 0, full);
  CHECK(p.x == doctest::Approx(8.0));
  CHECK(p.y == doctest::Approx(7.0));
}

TEST_CASE("locate_corner_backward matches finite differences") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 0.3);
  CornerHeatmapT<double> h = encode_heatmap_with_sigma<double>(all_at(20.3, 14.8, 40, 32), 32, 40, 2.0);
  for (auto& v : h.values) v = 0.7 * v + u(rng) * 0.1;
  for (DecodeOptions opts : {DecodeOptions{}, DecodeOptions{3, false, false}, DecodeOptions{3, true, true}}) {
    const int c = 3;
    const CornerPeak p = locate_corner(h, c, opts);
    const double gx = 0.7, gy = -1.3;
    std::vector<double> grad(h.values.size(), 0.0);
    locate_corner_backward(h, c, p, gx, gy, grad);
    const double eps = 1e-6;
    double worst = 0;
    for (int y = 0; y < h.height; ++y)
      for (int x = 0; x < h.width; ++x) {
        CornerHeatmapT<double> a = h, b = h;
        a.at(y, x, c) += eps;
        b.at(y, x, c) -= eps;
        const CornerPeak pa = locate_corner(a, c, opts), pb = locate_corner(b, c, opts);
        const double fd = (gx * (pa.x - pb.x) + gy * (pa.y - pb.y)) / (2 * eps);
        worst = std::max(worst, std::abs(fd - grad[h.index(y, x, c)]));
      }
    CHECK(worst < 1e-6);
  }
}
