#include "boxcorner/train/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "boxcorner/error.hpp"

namespace boxc {
namespace {

// Corner indices of each face in cyclic order, and the face's outward axis.
struct Face {
  std::array<int, 4> idx;
  int axis;
  int sign;
};

constexpr std::array<Face, 6> kFaces = {{
    {{0, 1, 3, 2}, 0, -1},
    {{4, 5, 7, 6}, 0, +1},
    {{0, 1, 5, 4}, 1, -1},
    {{2, 3, 7, 6}, 1, +1},
    {{0, 2, 6, 4}, 2, -1},
    {{1, 3, 7, 5}, 2, +1},
}};

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Vec3 v(n(rng), n(rng), n(rng));
    const double len = v.norm();
    if (len > 1e-6) return v / len;
  }
}

Pose look_at(const Vec3& center, const Vec3& target, double roll) {
  const Vec3 z = (target - center).normalized();
  Vec3 up = std::abs(z.z()) < 0.95 ? Vec3(0, 0, 1) : Vec3(0, 1, 0);
  Vec3 x = z.cross(up).normalized();
  Vec3 y = z.cross(x);
  const double c = std::cos(roll), s = std::sin(roll);
  const Vec3 xr = c * x + s * y;
  const Vec3 yr = z.cross(xr);
  Pose pose;
  pose.rotation.row(0) = xr.transpose();
  pose.rotation.row(1) = yr.transpose();
  pose.rotation.row(2) = z.transpose();
  pose.translation = -pose.rotation * center;
  return pose;
}

Vec3 camera_direction(std::mt19937_64& rng, const GenConfig& cfg) {
  if (cfg.min_elevation <= -90.0 && cfg.max_elevation >= 90.0) return random_unit(rng);
  // Uniform in area over the band: sin(elevation) is uniform.
  const double lo = std::sin(cfg.min_elevation * M_PI / 180.0);
  const double hi = std::sin(cfg.max_elevation * M_PI / 180.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double z = lo + (hi - lo) * u(rng);
  const double az = 2.0 * M_PI * u(rng);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(az), r * std::sin(az), z};
}

bool corners_inside(const Pose& pose, const Intrinsics& k, const BoundingBox3D& box, double margin) {
  for (const auto& c : box.corners) {
    auto uv = try_project_point(pose, k, c);
    if (!uv) return false;
    if (uv->x() < margin || uv->y() < margin || uv->x() > k.width - 1 - margin ||
        uv->y() > k.height - 1 - margin)
      return false;
  }
  return true;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

template <class T>
nn::Tensor<T> image_to_tensor(const Image& img) {
  nn::Tensor<T> t({static_cast<std::size_t>(img.height), static_cast<std::size_t>(img.width), 3});
  for (std::size_t i = 0; i < img.rgb.size(); ++i)
    t[i] = static_cast<T>((img.rgb[i] / 255.0 - 0.5) / 0.25);
  return t;
}

template nn::Tensor<float> image_to_tensor<float>(const Image&);
template nn::Tensor<double> image_to_tensor<double>(const Image&);

void refresh_ground_truth(Scene& scene) {
  const auto pts = project_corners(scene.query.pose, scene.query.intrinsics, scene.box);
  scene.gt_corners = Corners2D::from_points(pts, scene.query.intrinsics.width, scene.query.intrinsics.height);
}

void validate_scene(const Scene& s, double tol) {
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::Format, "scene " + std::to_string(s.index) + ": " + msg);
  };
  auto check_view = [&](const View& v, const std::string& name) {
    if (!v.pose.is_valid(1e-9)) fail(name + " pose is not a rigid transform");
    if (!v.intrinsics.is_valid()) fail(name + " intrinsics are invalid");
    const auto& r = v.mask_rect;
    if (!(r.x0 >= -0.5 && r.y0 >= -0.5 && r.x1 <= v.intrinsics.width - 0.5 &&
          r.y1 <= v.intrinsics.height - 0.5 && r.x1 > r.x0 && r.y1 > r.y0))
      fail(name + " mask rectangle is outside the image or empty");
    if (!v.image.rgb.empty() &&
        (v.image.width != v.intrinsics.width || v.image.height != v.intrinsics.height))
      fail(name + " image size differs from its intrinsics");
    if (!v.silhouette.bits.empty() &&
        (v.silhouette.width != v.intrinsics.width || v.silhouette.height != v.intrinsics.height))
      fail(name + " silhouette size differs from its intrinsics");
  };
  check_view(s.query, "query");
  for (std::size_t i = 0; i < s.references.size(); ++i) check_view(s.references[i], "reference " + std::to_string(i));
  if (s.references.empty()) fail("no reference views");
  const auto pts = project_corners(s.query.pose, s.query.intrinsics, s.box);
  for (int i = 0; i < kNumCorners; ++i) {
    if ((pts[i] - s.gt_corners.points[i]).cwiseAbs().maxCoeff() > tol)
      fail("gt corner " + std::to_string(i) + " is inconsistent with the box");
  }
  if (!(s.diameter > 0.0)) fail("diameter must be positive");
}

void GenConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, "generator config: " + m); };
  if (image_width < 8 || image_height < 8) fail("image must be at least 8x8");
  if (!(focal > 0)) fail("focal length must be positive");
  if (!(min_distance > 0 && max_distance >= min_distance)) fail("invalid camera distance range");
  if (!(min_edge > 0 && max_edge >= min_edge)) fail("invalid edge length range");
  if (min_refs < 1 || max_refs > 15 || max_refs < min_refs) fail("reference count must lie in [1, 15]");
  if (cloud_points_per_face < 0) fail("cloud_points_per_face must be non-negative");
  if (!(cloud_noise >= 0)) fail("cloud noise must be non-negative");
  if (!(min_elevation >= -90.0 && max_elevation <= 90.0 && min_elevation <= max_elevation))
    fail("elevation range must lie in [-90, 90]");
}

std::uint64_t scene_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double point_set_diameter(const PointCloud& cloud) {
  double best = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    for (std::size_t j = i + 1; j < cloud.size(); ++j)
      best = std::max(best, (cloud.points[i] - cloud.points[j]).squaredNorm());
  return std::sqrt(best);
}

CuboidAppearance sample_appearance(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CuboidAppearance a;
  for (int f = 0; f < 6; ++f) {
    for (int c = 0; c < 3; ++c) a.color[f][c] = 40.0 + 215.0 * u(rng);
    a.pattern[f] = static_cast<int>(u(rng) * 3.0) % 3;
    a.frequency[f] = 1.0 + 3.0 * u(rng);
  }
  for (int c = 0; c < 3; ++c) a.background[c] = 10.0 + 50.0 * u(rng);
  return a;
}

void render_cuboid(const BoundingBox3D& box, const CuboidAppearance& look, View& view) {
  const Intrinsics& k = view.intrinsics;
  const int W = k.width, H = k.height;
  view.image = Image(W, H);
  view.silhouette = MaskBitmap{W, H, std::vector<std::uint8_t>(static_cast<std::size_t>(W) * H, 0)};
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double shade = 0.85 + 0.15 * (static_cast<double>(y) / H);
      auto* px = view.image.pixel(x, y);
      for (int c = 0; c < 3; ++c) px[c] = to_byte(look.background[c] * shade);
    }
  }

  const Vec3 cam = view.pose.camera_center();
  const Vec3 center = box.center();
  struct Drawn {
    int face;
    double depth;
  };
  std::vector<Drawn> order;
  for (int f = 0; f < 6; ++f) {
    Vec3 fc = Vec3::Zero();
    for (int i : kFaces[f].idx) fc += box.corners[i];
    fc /= 4.0;
    const Vec3 normal = (fc - center).normalized();
    if (normal.dot(fc - cam) >= 0.0) continue;  // back face
    order.push_back({f, view.pose.apply(fc).z()});
  }
  std::sort(order.begin(), order.end(), [](const Drawn& a, const Drawn& b) {
    return a.depth > b.depth || (a.depth == b.depth && a.face < b.face);
  });

  const Mat3 kinv = k.matrix().inverse();
  const Mat3 rt = view.pose.rotation.transpose();
  for (const auto& d : order) {
    const Face& face = kFaces[d.face];
    std::array<Vec2, 4> poly;
    for (int i = 0; i < 4; ++i) poly[i] = project_point(view.pose, k, box.corners[face.idx[i]]);
    double area = 0.0;
    for (int i = 0; i < 4; ++i) {
      const Vec2& a = poly[i];
      const Vec2& b = poly[(i + 1) % 4];
      area += a.x() * b.y() - a.y() * b.x();
    }
    const double orient = area >= 0 ? 1.0 : -1.0;
    double minx = poly[0].x(), maxx = minx, miny = poly[0].y(), maxy = miny;
    for (const auto& p : poly) {
      minx = std::min(minx, p.x());
      maxx = std::max(maxx, p.x());
      miny = std::min(miny, p.y());
      maxy = std::max(maxy, p.y());
    }
    const Vec3 origin = box.corners[face.idx[0]];
    const Vec3 e1 = box.corners[face.idx[1]] - origin;
    const Vec3 e2 = box.corners[face.idx[3]] - origin;
    const Vec3 normal = e1.cross(e2);
    const Vec3 light = (cam - origin).normalized();
    const double lambert = 0.55 + 0.45 * std::abs(normal.normalized().dot(light));

    const int x0 = std::max(0, static_cast<int>(std::ceil(minx)));
    const int x1 = std::min(W - 1, static_cast<int>(std::floor(maxx)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(miny)));
    const int y1 = std::min(H - 1, static_cast<int>(std::floor(maxy)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        bool inside = true;
        for (int i = 0; i < 4 && inside; ++i) {
          const Vec2& a = poly[i];
          const Vec2& b = poly[(i + 1) % 4];
          const double cross = (b.x() - a.x()) * (y - a.y()) - (b.y() - a.y()) * (x - a.x());
          inside = cross * orient >= 0.0;
        }
        if (!inside) continue;
        // Face-local coordinates of the pixel ray hit.
        const Vec3 dir = rt * (kinv * Vec3(x, y, 1.0));
        const double denom = normal.dot(dir);
        double pattern = 0.5;
        if (std::abs(denom) > 1e-12) {
          const double s = normal.dot(origin - cam) / denom;
          const Vec3 hit = cam + s * dir - origin;
          const double fu = std::clamp(hit.dot(e1) / e1.squaredNorm(), 0.0, 1.0);
          const double fv = std::clamp(hit.dot(e2) / e2.squaredNorm(), 0.0, 1.0);
          const double f = look.frequency[d.face];
          switch (look.pattern[d.face]) {
            case 0: pattern = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * f * fu); break;
            case 1: pattern = ((static_cast<int>(fu * 2 * f) + static_cast<int>(fv * 2 * f)) % 2) ? 1.0 : 0.0; break;
            default: pattern = fv; break;
          }
        }
        const double gain = lambert * (0.7 + 0.3 * pattern);
        auto* px = view.image.pixel(x, y);
        for (int c = 0; c < 3; ++c) px[c] = to_byte(look.color[d.face][c] * gain);
        view.silhouette.bits[static_cast<std::size_t>(y) * W + x] = 1;
      }
    }
  }
}

Scene generate_scene(std::mt19937_64& rng, const GenConfig& cfg) {
  cfg.validate();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  Scene scene;
  Vec3 edges(uniform(cfg.min_edge, cfg.max_edge), uniform(cfg.min_edge, cfg.max_edge),
             uniform(cfg.min_edge, cfg.max_edge));
  if (u(rng) < cfg.symmetric_prob) {
    const int a = static_cast<int>(u(rng) * 3.0) % 3;
    edges[(a + 1) % 3] = edges[a];
    scene.symmetric = true;
  }
  const BoundingBox3D cuboid = BoundingBox3D::from_extents(-0.5 * edges, 0.5 * edges);
  const CuboidAppearance look = sample_appearance(rng);

  Intrinsics k;
  k.fx = k.fy = cfg.focal;
  k.cx = 0.5 * (cfg.image_width - 1);
  k.cy = 0.5 * (cfg.image_height - 1);
  k.width = cfg.image_width;
  k.height = cfg.image_height;

  auto place_camera = [&]() {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const Vec3 dir = camera_direction(rng, cfg);
      const double dist = uniform(cfg.min_distance, cfg.max_distance);
      const Vec3 target(uniform(-cfg.target_jitter, cfg.target_jitter),
                        uniform(-cfg.target_jitter, cfg.target_jitter),
                        uniform(-cfg.target_jitter, cfg.target_jitter));
      const Pose pose = look_at(target + dist * dir, target, uniform(-cfg.roll_jitter, cfg.roll_jitter));
      if (corners_inside(pose, k, cuboid, cfg.corner_margin)) return pose;
    }
    throw Error(ErrorKind::Config, "generator config: no camera placement keeps the object in view");
  };

  const int num_refs = std::uniform_int_distribution<int>(cfg.min_refs, cfg.max_refs)(rng);
  const Pose query_pose = place_camera();
  std::vector<Pose> ref_poses;
  for (int i = 0; i < num_refs; ++i) ref_poses.push_back(place_camera());

  // Surface samples plus the vertices, in the cuboid frame.
  PointCloud raw;
  for (const auto& c : cuboid.corners) raw.points.push_back(c);
  std::normal_distribution<double> noise(0.0, cfg.cloud_noise > 0 ? cfg.cloud_noise : 1.0);
  for (const auto& face : kFaces) {
    const Vec3 o = cuboid.corners[face.idx[0]];
    const Vec3 e1 = cuboid.corners[face.idx[1]] - o;
    const Vec3 e2 = cuboid.corners[face.idx[3]] - o;
    for (int i = 0; i < cfg.cloud_points_per_face; ++i) raw.points.push_back(o + u(rng) * e1 + u(rng) * e2);
  }
  if (cfg.cloud_noise > 0)
    for (auto& p : raw.points) p += Vec3(noise(rng), noise(rng), noise(rng));

  // Detection rectangles: projected cuboid bounds grown by one pixel.
  auto detection_rect = [&](const Pose& pose) {
    const auto pts = project_corners(pose, k, cuboid);
    Rect r{pts[0].x(), pts[0].y(), pts[0].x(), pts[0].y()};
    for (const auto& p : pts) {
      r.x0 = std::min(r.x0, p.x());
      r.y0 = std::min(r.y0, p.y());
      r.x1 = std::max(r.x1, p.x());
      r.y1 = std::max(r.y1, p.y());
    }
    r.x0 = std::max(-0.5, r.x0 - 1.0);
    r.y0 = std::max(-0.5, r.y0 - 1.0);
    r.x1 = std::min(k.width - 0.5, r.x1 + 1.0);
    r.y1 = std::min(k.height - 0.5, r.y1 + 1.0);
    return r;
  };

  std::vector<ViewObservation> obs;
  for (const auto& pose : ref_poses) obs.push_back({pose, k, DetectionMask(detection_rect(pose), k.width, k.height)});
  PointCloud filtered = filter_points(raw, obs);
  const FittedBox fitted = fit_bounding_box(filtered);
  const Vec3 c = fitted.centroid;

  auto centered_pose = [&](const Pose& p) {
    Pose out = p;
    out.translation = p.translation + p.rotation * c;
    return out;
  };
  BoundingBox3D cuboid_centered;
  for (int i = 0; i < kNumCorners; ++i) cuboid_centered.corners[i] = cuboid.corners[i] - c;

  auto make_view = [&](const Pose& pose_in_cuboid_frame) {
    View v;
    v.pose = centered_pose(pose_in_cuboid_frame);
    v.intrinsics = k;
    v.mask_rect = detection_rect(pose_in_cuboid_frame);
    render_cuboid(cuboid_centered, look, v);
    return v;
  };
  scene.query = make_view(query_pose);
  for (const auto& pose : ref_poses) scene.references.push_back(make_view(pose));
  for (auto& p : filtered.points) p -= c;
  scene.cloud = std::move(filtered);
  scene.box = fitted.box;
  scene.diameter = point_set_diameter(scene.cloud);
  refresh_ground_truth(scene);
  return scene;
}

Scene generate_scene(std::uint64_t seed, std::uint64_t index, const GenConfig& config) {
  std::mt19937_64 rng(scene_seed(seed, index));
  Scene s = generate_scene(rng, config);
  s.index = index;
  return s;
}

}  // namespace boxc
