#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "boxcorner/heatmap.hpp"
#include "boxcorner/nn/model.hpp"
#include "boxcorner/train/augment.hpp"
#include "boxcorner/train/loss.hpp"
#include "boxcorner/train/optim.hpp"
#include "boxcorner/train/scene.hpp"

namespace boxc {

struct TrainConfig {
  nn::ModelConfig model = nn::ModelConfig::desk();
  AdamWConfig optim;
  int batch_size = 8;
  double lambda = kDefaultFineWeight;
  // lambda ramps linearly from 0 over this fraction of optim.total_steps
  double lambda_warmup = 0.5;
  double sigma_scale = kDefaultSigmaScale;
  DecodeOptions decode;
  AugmentConfig augment = AugmentConfig::training();

  void validate() const;
  double lambda_at(std::int64_t step) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct LossRecord {
  std::int64_t step = 0;
  double lr = 0.0;
  double coarse = 0.0;
  double fine = 0.0;
  double total = 0.0;
};

template <class T>
struct TrainSample {
  nn::ModelInput<T> input;
  CornerHeatmapT<T> gt_heatmap;
  Corners2D gt_corners;
};

// Reference heatmaps are encoded from the box projected with each reference
// pose; the target is encoded from the query's ground-truth corners.
template <class T>
TrainSample<T> make_sample(const Scene& scene, std::span<const int> ref_indices, double sigma_scale);

// Random reference count in [model.min_refs, min(model.max_refs, available)]
// and a random subset of that size, in ascending index order.
std::vector<int> sample_references(const Scene& scene, const nn::ModelConfig& model, std::mt19937_64& rng);

// Augments each scene, averages the per-sample gradients and applies one
// AdamW update. Throws ErrorKind::NumericFailure on a non-finite loss, before
// touching params.
template <class T>
LossRecord train_step(std::span<const Scene> batch, nn::ModelParams<T>& params, OptimState<T>& opt,
                      const TrainConfig& config, std::mt19937_64& rng);

// Loss of the current parameters on one sample without updating anything.
template <class T>
LossComponents evaluate_loss(const TrainSample<T>& sample, const nn::ModelParams<T>& params,
                             const TrainConfig& config);

}  // namespace boxc
