#include "boxcorner/heatmap.hpp"

#include <algorithm>
#include <cmath>

#include "boxcorner/error.hpp"

namespace boxc {

Corners2D Corners2D::from_points(const std::array<Vec2, kNumCorners>& pts, int width, int height) {
  Corners2D c;
  c.points = pts;
  for (int i = 0; i < kNumCorners; ++i) {
    const auto& p = pts[i];
    c.visible[i] = p.allFinite() && p.x() >= -0.5 && p.x() < width - 0.5 && p.y() >= -0.5 &&
                   p.y() < height - 0.5;
  }
  return c;
}

double object_sigma(const Corners2D& corners, double scale) {
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : corners.points) {
    if (!p.allFinite()) throw Error(ErrorKind::InvalidArgument, "corner coordinates must be finite");
    centroid += p;
  }
  centroid /= kNumCorners;
  double mean_dist = 0.0;
  for (const auto& p : corners.points) mean_dist += (p - centroid).norm();
  mean_dist /= kNumCorners;
  const double sigma = scale * mean_dist;
  if (!(sigma > 0.0)) throw Error(ErrorKind::ZeroSize, "box corners are coincident; object size is zero");
  return sigma;
}

template <class T>
CornerHeatmapT<T> encode_heatmap_with_sigma(const Corners2D& corners, int height, int width,
                                            double sigma) {
  if (height < 1 || width < 1) throw Error(ErrorKind::Shape, "heatmap size must be positive");
  if (!(sigma > 0.0)) throw Error(ErrorKind::ZeroSize, "heatmap sigma must be positive");
  CornerHeatmapT<T> h(height, width);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < kNumCorners; ++c) {
        const double d = std::hypot(x - corners.points[c].x(), y - corners.points[c].y());
        h.at(y, x, c) = static_cast<T>(std::exp(-d * inv));
      }
    }
  }
  return h;
}

template <class T>
CornerHeatmapT<T> encode_heatmap(const Corners2D& corners, int height, int width, double sigma_scale) {
  return encode_heatmap_with_sigma<T>(corners, height, width, object_sigma(corners, sigma_scale));
}

template <class T>
CornerPeak locate_corner(const CornerHeatmapT<T>& h, int channel, const DecodeOptions& opts) {
  CornerPeak pk;
  const int W = h.width;
  const int H = h.height;
  double best = -1.0;
  double lowest = 2.0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double v = h.at(y, x, channel);
      // Strict comparison keeps the smallest row-major index on ties.
      if (v > best) {
        best = v;
        pk.argmax_x = x;
        pk.argmax_y = y;
      }
      lowest = std::min(lowest, v);
    }
  }
  pk.peak = std::clamp(best, 0.0, 1.0);
  pk.x = 0.5 * (W - 1);
  pk.y = 0.5 * (H - 1);
  if (!(best > 0.0) || !(best > lowest)) return pk;

  if (opts.full_map) {
    pk.x0 = 0;
    pk.y0 = 0;
    pk.x1 = W - 1;
    pk.y1 = H - 1;
  } else {
    const int r = opts.window_radius;
    pk.x0 = std::max(0, pk.argmax_x - r);
    pk.y0 = std::max(0, pk.argmax_y - r);
    pk.x1 = std::min(W - 1, pk.argmax_x + r);
    pk.y1 = std::min(H - 1, pk.argmax_y + r);
  }

  double threshold = 0.0;
  if (opts.subtract_ring && !opts.full_map && pk.x1 > pk.x0 && pk.y1 > pk.y0) {
    double ring = -1.0;
    for (int y = pk.y0; y <= pk.y1; ++y) {
      for (int x = pk.x0; x <= pk.x1; ++x) {
        if (y != pk.y0 && y != pk.y1 && x != pk.x0 && x != pk.x1) continue;
        const double v = h.at(y, x, channel);
        if (v > ring) {
          ring = v;
          pk.ring_x = x;
          pk.ring_y = y;
        }
      }
    }
    threshold = ring;
  }
  pk.threshold = threshold;

  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (int y = pk.y0; y <= pk.y1; ++y) {
    for (int x = pk.x0; x <= pk.x1; ++x) {
      const double w = static_cast<double>(h.at(y, x, channel)) - threshold;
      if (w <= 0.0) continue;
      sw += w;
      sx += w * x;
      sy += w * y;
    }
  }
  if (!(sw > 0.0)) {
    pk.ring_x = pk.ring_y = -1;
    return pk;
  }
  pk.weight_sum = sw;
  pk.x = sx / sw;
  pk.y = sy / sw;
  pk.valid = true;
  return pk;
}

template <class T>
DecodedCorners decode_corners(const CornerHeatmapT<T>& h, const DecodeOptions& opts) {
  if (h.values.size() != static_cast<std::size_t>(h.height) * h.width * kNumCorners)
    throw Error(ErrorKind::Shape, "heatmap storage does not match its dimensions");
  DecodedCorners out;
  std::array<Vec2, kNumCorners> pts;
  for (int c = 0; c < kNumCorners; ++c) {
    out.peaks[c] = locate_corner(h, c, opts);
    pts[c] = Vec2(out.peaks[c].x, out.peaks[c].y);
    out.confidence[c] = out.peaks[c].peak;
  }
  out.corners = Corners2D::from_points(pts, h.width, h.height);
  for (int c = 0; c < kNumCorners; ++c) {
    if (!out.peaks[c].valid) out.corners.visible[c] = false;
  }
  return out;
}

template <class T>
void locate_corner_backward(const CornerHeatmapT<T>& h, int channel, const CornerPeak& pk,
                            double dx, double dy, std::vector<T>& grad) {
  if (!pk.valid) return;
  // x = sum w_j x_j / S with w_j = h_j - tau on the support; tau is the ring
  // pixel value, so it receives minus the summed support derivative.
  double ring_grad = 0.0;
  for (int y = pk.y0; y <= pk.y1; ++y) {
    for (int x = pk.x0; x <= pk.x1; ++x) {
      const double w = static_cast<double>(h.at(y, x, channel)) - pk.threshold;
      if (w <= 0.0) continue;
      const double g = (dx * (x - pk.x) + dy * (y - pk.y)) / pk.weight_sum;
      grad[h.index(y, x, channel)] += static_cast<T>(g);
      ring_grad -= g;
    }
  }
  if (pk.ring_x >= 0) grad[h.index(pk.ring_y, pk.ring_x, channel)] += static_cast<T>(ring_grad);
}

#define BOXC_INSTANTIATE_HEATMAP(T)                                                              \
  template CornerHeatmapT<T> encode_heatmap<T>(const Corners2D&, int, int, double);             \
  template CornerHeatmapT<T> encode_heatmap_with_sigma<T>(const Corners2D&, int, int, double);  \
  template CornerPeak locate_corner<T>(const CornerHeatmapT<T>&, int, const DecodeOptions&);    \
  template DecodedCorners decode_corners<T>(const CornerHeatmapT<T>&, const DecodeOptions&);    \
  template void locate_corner_backward<T>(const CornerHeatmapT<T>&, int, const CornerPeak&,     \
                                          double, double, std::vector<T>&);

BOXC_INSTANTIATE_HEATMAP(float)
BOXC_INSTANTIATE_HEATMAP(double)

#undef BOXC_INSTANTIATE_HEATMAP

}  // namespace boxc
