#include "boxcorner/train/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace boxc {
namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

bool all_in_front(const Scene& s, const BoundingBox3D& box) {
  auto ok = [&](const View& v) {
    for (const auto& c : box.corners)
      if (!(v.pose.apply(c).z() > 1e-6)) return false;
    return true;
  };
  if (!ok(s.query)) return false;
  for (const auto& r : s.references)
    if (!ok(r)) return false;
  return true;
}

}  // namespace

AugmentConfig AugmentConfig::training() {
  AugmentConfig c;
  c.rotate_box_prob = 0.3;
  c.occlude_prob = 0.3;
  c.noise_prob = 0.5;
  c.blur_prob = 0.2;
  c.background_prob = 0.5;
  return c;
}

double apply_occluder(View& view, double fraction, std::mt19937_64& rng) {
  const auto& sil = view.silhouette;
  const int W = sil.width, H = sil.height;
  int area = 0, minx = W, maxx = -1, miny = H, maxy = -1;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (sil.at(x, y)) {
        ++area;
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
      }
  if (area == 0 || fraction <= 0.0) return 0.0;

  std::uniform_int_distribution<int> side_dist(0, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int side = side_dist(rng);
  const double target = fraction * area;

  // Rectangle spans the full bbox along one axis and grows inward from `side`.
  auto covered = [&](int depth) {
    int n = 0;
    for (int y = miny; y <= maxy; ++y)
      for (int x = minx; x <= maxx; ++x) {
        bool in = false;
        switch (side) {
          case 0: in = x < minx + depth; break;
          case 1: in = x > maxx - depth; break;
          case 2: in = y < miny + depth; break;
          default: in = y > maxy - depth; break;
        }
        if (in && sil.at(x, y)) ++n;
      }
    return n;
  };
  const int extent = (side < 2) ? (maxx - minx + 1) : (maxy - miny + 1);
  int depth = 0;
  int count = 0;
  while (depth < extent) {
    const int next = covered(depth + 1);
    if (next > target) break;
    ++depth;
    count = next;
  }
  if (depth == 0) return 0.0;

  const double base[3] = {255.0 * u(rng), 255.0 * u(rng), 255.0 * u(rng)};
  std::normal_distribution<double> n(0.0, 12.0);
  for (int y = miny; y <= maxy; ++y)
    for (int x = minx; x <= maxx; ++x) {
      bool in = false;
      switch (side) {
        case 0: in = x < minx + depth; break;
        case 1: in = x > maxx - depth; break;
        case 2: in = y < miny + depth; break;
        default: in = y > maxy - depth; break;
      }
      if (!in) continue;
      auto* px = view.image.pixel(x, y);
      for (int c = 0; c < 3; ++c) px[c] = to_byte(base[c] + n(rng));
    }
  return static_cast<double>(count) / area;
}

void add_pixel_noise(Image& img, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  for (auto& v : img.rgb) v = to_byte(v + n(rng));
}

void apply_motion_blur(Image& img, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dir_dist(0, 1);
  const bool horizontal = dir_dist(rng) == 0;
  const Image src = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        int n = 0;
        for (int t = -1; t <= 1; ++t) {
          const int xx = horizontal ? x + t : x;
          const int yy = horizontal ? y : y + t;
          if (xx < 0 || yy < 0 || xx >= img.width || yy >= img.height) continue;
          s += src.pixel(xx, yy)[c];
          ++n;
        }
        img.pixel(x, y)[c] = to_byte(s / n);
      }
}

void composite_background(View& view, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double base[3], amp[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 30.0 + 170.0 * u(rng);
    amp[c] = 20.0 + 60.0 * u(rng);
  }
  const double fx = 0.05 + 0.3 * u(rng), fy = 0.05 + 0.3 * u(rng), phase = 2.0 * std::numbers::pi * u(rng);
  for (int y = 0; y < view.image.height; ++y)
    for (int x = 0; x < view.image.width; ++x) {
      if (!view.silhouette.bits.empty() && view.silhouette.at(x, y)) continue;
      const double wave = std::sin(fx * x + phase) * std::cos(fy * y);
      auto* px = view.image.pixel(x, y);
      for (int c = 0; c < 3; ++c) px[c] = to_byte(base[c] + amp[c] * wave);
    }
}

Scene augment_sample(const Scene& scene, std::mt19937_64& rng, const AugmentConfig& cfg) {
  Scene out = scene;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&](double p) { return p > 0.0 && u(rng) < p; };

  if (draw(cfg.rotate_box_prob)) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (int attempt = 0; attempt < 16; ++attempt) {
      Vec3 axis(n(rng), n(rng), n(rng));
      if (axis.norm() < 1e-6) continue;
      axis.normalize();
      const double angle = -std::numbers::pi + 2.0 * std::numbers::pi * u(rng);
      const BoundingBox3D rotated = rotate_box(out.box, axis, angle);
      if (!all_in_front(out, rotated)) continue;
      out.box = rotated;
      refresh_ground_truth(out);
      break;
    }
  }
  if (draw(cfg.background_prob)) {
    composite_background(out.query, rng);
    for (auto& r : out.references) composite_background(r, rng);
  }
  if (draw(cfg.occlude_prob)) apply_occluder(out.query, cfg.max_occlusion * (0.2 + 0.8 * u(rng)), rng);
  if (draw(cfg.blur_prob)) {
    apply_motion_blur(out.query.image, rng);
    for (auto& r : out.references) apply_motion_blur(r.image, rng);
  }
  if (draw(cfg.noise_prob)) {
    add_pixel_noise(out.query.image, cfg.noise_std, rng);
    for (auto& r : out.references) add_pixel_noise(r.image, cfg.noise_std, rng);
  }
  return out;
}

}  // namespace boxc
