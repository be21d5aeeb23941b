#include "boxcorner/train/loss.hpp"

#include <array>
#include <cmath>

#include "boxcorner/error.hpp"

namespace boxc {
namespace {

std::array<double, 2 * kNumCorners> normalized(const Corners2D& c, int width, int height) {
  std::array<double, 2 * kNumCorners> out{};
  for (int i = 0; i < kNumCorners; ++i) {
    out[2 * i] = c.points[i].x() / width;
    out[2 * i + 1] = c.points[i].y() / height;
  }
  return out;
}

}  // namespace

template <class T>
T smooth_l1(std::span<const T> pred, std::span<const T> target, std::span<T> grad) {
  if (pred.size() != target.size() || pred.empty())
    throw Error(ErrorKind::Shape, "smooth_l1: prediction and target sizes differ");
  if (!grad.empty() && grad.size() != pred.size())
    throw Error(ErrorKind::Shape, "smooth_l1: gradient buffer has the wrong size");
  const T inv_n = T(1) / static_cast<T>(pred.size());
  T sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    const T ad = std::abs(d);
    if (ad < T(1)) {
      sum += T(0.5) * d * d;
      if (!grad.empty()) grad[i] = d * inv_n;
    } else {
      sum += ad - T(0.5);
      if (!grad.empty()) grad[i] = (d > 0 ? T(1) : T(-1)) * inv_n;
    }
  }
  return sum * inv_n;
}

template <class T>
LossComponents loss_total(const CornerHeatmapT<T>& pred_hm, const CornerHeatmapT<T>& gt_hm,
                          const Corners2D& pred_corners, const Corners2D& gt_corners, double lambda) {
  if (pred_hm.width != gt_hm.width || pred_hm.height != gt_hm.height)
    throw Error(ErrorKind::Shape, "loss_total: heatmap sizes differ");
  if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "loss_total: lambda must be non-negative");
  LossComponents out;
  out.coarse = smooth_l1<T>(pred_hm.values, gt_hm.values);
  const auto p = normalized(pred_corners, pred_hm.width, pred_hm.height);
  const auto g = normalized(gt_corners, pred_hm.width, pred_hm.height);
  out.fine = smooth_l1<double>(p, g);
  out.total = out.coarse + lambda * out.fine;
  return out;
}

template <class T>
LossComponents heatmap_training_loss(const CornerHeatmapT<T>& pred, const CornerHeatmapT<T>& gt_hm,
                                     const Corners2D& gt_corners, double lambda,
                                     const DecodeOptions& decode, std::vector<T>& grad) {
  if (pred.values.size() != gt_hm.values.size())
    throw Error(ErrorKind::Shape, "training loss: heatmap sizes differ");
  grad.assign(pred.values.size(), T(0));
  LossComponents out;
  out.coarse = smooth_l1<T>(pred.values, gt_hm.values, grad);

  std::array<CornerPeak, kNumCorners> peaks;
  Corners2D pc;
  for (int c = 0; c < kNumCorners; ++c) {
    peaks[c] = locate_corner(pred, c, decode);
    pc.points[c] = Vec2(peaks[c].x, peaks[c].y);
  }
  const auto p = normalized(pc, pred.width, pred.height);
  const auto g = normalized(gt_corners, pred.width, pred.height);
  std::array<double, 2 * kNumCorners> dfine{};
  out.fine = smooth_l1<double>(p, g, dfine);
  out.total = out.coarse + lambda * out.fine;
  if (lambda > 0.0) {
    for (int c = 0; c < kNumCorners; ++c) {
      const double dx = lambda * dfine[2 * c] / pred.width;
      const double dy = lambda * dfine[2 * c + 1] / pred.height;
      locate_corner_backward(pred, c, peaks[c], dx, dy, grad);
    }
  }
  return out;
}

template float smooth_l1<float>(std::span<const float>, std::span<const float>, std::span<float>);
template double smooth_l1<double>(std::span<const double>, std::span<const double>, std::span<double>);
template LossComponents loss_total<float>(const CornerHeatmapT<float>&, const CornerHeatmapT<float>&,
                                          const Corners2D&, const Corners2D&, double);
template LossComponents loss_total<double>(const CornerHeatmapT<double>&, const CornerHeatmapT<double>&,
                                           const Corners2D&, const Corners2D&, double);
template LossComponents heatmap_training_loss<float>(const CornerHeatmapT<float>&, const CornerHeatmapT<float>&,
                                                     const Corners2D&, double, const DecodeOptions&,
                                                     std::vector<float>&);
template LossComponents heatmap_training_loss<double>(const CornerHeatmapT<double>&, const CornerHeatmapT<double>&,
                                                      const Corners2D&, double, const DecodeOptions&,
                                                      std::vector<double>&);

}  // namespace boxc
