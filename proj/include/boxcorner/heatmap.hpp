#pragma once

// Per-corner heatmap codec. A corner heatmap has one channel per box corner,
// stored row-major and channel-last: value(y, x, c) = values[(y*W + x)*8 + c].
// Pixel (x, y) is evaluated at the integer coordinate (x, y).

#include <array>
#include <cstddef>
#include <vector>

#include "boxcorner/geom3d.hpp"

namespace boxc {

template <class T>
struct CornerHeatmapT {
  int height = 0;
  int width = 0;
  std::vector<T> values;

  CornerHeatmapT() = default;
  CornerHeatmapT(int h, int w) : height(h), width(w), values(static_cast<std::size_t>(h) * w * kNumCorners, T(0)) {}

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * kNumCorners + c;
  }
  T& at(int y, int x, int c) { return values[index(y, x, c)]; }
  T at(int y, int x, int c) const { return values[index(y, x, c)]; }
};

using CornerHeatmap = CornerHeatmapT<float>;

struct Corners2D {
  std::array<Vec2, kNumCorners> points;
  std::array<bool, kNumCorners> visible{};

  // Visibility is set from the image bounds [-0.5, W - 0.5) x [-0.5, H - 0.5).
  static Corners2D from_points(const std::array<Vec2, kNumCorners>& pts, int width, int height);
};

inline constexpr double kDefaultSigmaScale = 0.1;

// sigma = scale * mean distance of the 8 corners to their 2D centroid.
double object_sigma(const Corners2D& corners, double scale = kDefaultSigmaScale);

// H(x, y, i) = exp(-d_i(x, y) / (2 sigma^2)), d_i the Euclidean pixel
// distance to corner i. Corners outside the image still contribute.
template <class T>
CornerHeatmapT<T> encode_heatmap(const Corners2D& corners, int height, int width,
                                 double sigma_scale = kDefaultSigmaScale);
template <class T>
CornerHeatmapT<T> encode_heatmap_with_sigma(const Corners2D& corners, int height, int width,
                                            double sigma);

struct DecodeOptions {
  int window_radius = 3;
  // Weights inside the window are max(h - ring_max, 0) where ring_max is the
  // largest value on the window boundary. This removes the pull toward the
  // window center that a truncated plain centroid has.
  bool subtract_ring = true;
  // Plain value-weighted centroid over the whole channel (ablation).
  bool full_map = false;
};

// Everything needed to differentiate the extracted coordinate with respect to
// the channel values.
struct CornerPeak {
  int argmax_x = 0;
  int argmax_y = 0;
  double peak = 0.0;
  double x = 0.0;
  double y = 0.0;
  bool valid = false;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive window
  int ring_x = -1, ring_y = -1;        // pixel holding ring_max, -1 if unused
  double threshold = 0.0;
  double weight_sum = 0.0;
};

struct DecodedCorners {
  Corners2D corners;
  std::array<double, kNumCorners> confidence{};
  std::array<CornerPeak, kNumCorners> peaks;
};

template <class T>
CornerPeak locate_corner(const CornerHeatmapT<T>& h, int channel, const DecodeOptions& opts = {});

template <class T>
DecodedCorners decode_corners(const CornerHeatmapT<T>& h, const DecodeOptions& opts = {});

// Accumulates d(loss)/d(values) into `grad` (same layout as h.values) given
// d(loss)/dx and d(loss)/dy of one decoded corner.
template <class T>
void locate_corner_backward(const CornerHeatmapT<T>& h, int channel, const CornerPeak& peak,
                            double dx, double dy, std::vector<T>& grad);

}  // namespace boxc
