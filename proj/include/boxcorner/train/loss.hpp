#pragma once

#include <span>
#include <vector>

#include "boxcorner/heatmap.hpp"

namespace boxc {

// Mean over elements of 0.5 d^2 (|d| < 1) or |d| - 0.5, d = pred - target.
// When `grad` is non-empty, writes d(loss)/d(pred) into it.
template <class T>
T smooth_l1(std::span<const T> pred, std::span<const T> target, std::span<T> grad = {});

struct LossComponents {
  double total = 0.0;
  double coarse = 0.0;
  double fine = 0.0;
};

inline constexpr double kDefaultFineWeight = 2.0;

// coarse + lambda * fine. Corner coordinates are divided by the heatmap width
// and height before the fine term.
template <class T>
LossComponents loss_total(const CornerHeatmapT<T>& pred_hm, const CornerHeatmapT<T>& gt_hm,
                          const Corners2D& pred_corners, const Corners2D& gt_corners, double lambda);

// Training objective on a predicted heatmap. Fine corners come from the
// windowed soft-argmax of `pred`; d(loss)/d(pred values) is written to grad.
template <class T>
LossComponents heatmap_training_loss(const CornerHeatmapT<T>& pred, const CornerHeatmapT<T>& gt_hm,
                                     const Corners2D& gt_corners, double lambda,
                                     const DecodeOptions& decode, std::vector<T>& grad);

}  // namespace boxc
