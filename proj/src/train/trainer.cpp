#include "boxcorner/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "boxcorner/error.hpp"

namespace boxc {

void TrainConfig::validate() const {
  model.validate();
  if (batch_size < 1) throw Error(ErrorKind::Config, "batch_size must be at least 1");
  if (!(lambda >= 0.0)) throw Error(ErrorKind::Config, "lambda must be non-negative");
  if (!(lambda_warmup >= 0.0 && lambda_warmup <= 1.0))
    throw Error(ErrorKind::Config, "lambda_warmup must lie in [0, 1]");
  if (!(sigma_scale > 0.0)) throw Error(ErrorKind::Config, "sigma_scale must be positive");
  if (!(optim.lr >= 0.0) || !(optim.min_lr >= 0.0)) throw Error(ErrorKind::Config, "learning rates must be non-negative");
  if (optim.total_steps < 0) throw Error(ErrorKind::Config, "total_steps must be non-negative");
  if (decode.window_radius < 1) throw Error(ErrorKind::Config, "decode window radius must be at least 1");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{
      {"model", c.model},
      {"lr", c.optim.lr},
      {"min_lr", c.optim.min_lr},
      {"beta1", c.optim.beta1},
      {"beta2", c.optim.beta2},
      {"eps", c.optim.eps},
      {"weight_decay", c.optim.weight_decay},
      {"steps", c.optim.total_steps},
      {"batch_size", c.batch_size},
      {"lambda", c.lambda},
      {"lambda_warmup", c.lambda_warmup},
      {"sigma_scale", c.sigma_scale},
      {"decode_window_radius", c.decode.window_radius},
      {"augment",
       {{"rotate_box_prob", c.augment.rotate_box_prob},
        {"occlude_prob", c.augment.occlude_prob},
        {"max_occlusion", c.augment.max_occlusion},
        {"noise_prob", c.augment.noise_prob},
        {"noise_std", c.augment.noise_std},
        {"blur_prob", c.augment.blur_prob},
        {"background_prob", c.augment.background_prob}}},
  };
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("model")) j.at("model").get_to(c.model);
  c.optim.lr = j.value("lr", c.optim.lr);
  c.optim.min_lr = j.value("min_lr", c.optim.min_lr);
  c.optim.beta1 = j.value("beta1", c.optim.beta1);
  c.optim.beta2 = j.value("beta2", c.optim.beta2);
  c.optim.eps = j.value("eps", c.optim.eps);
  c.optim.weight_decay = j.value("weight_decay", c.optim.weight_decay);
  c.optim.total_steps = j.value("steps", c.optim.total_steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lambda = j.value("lambda", c.lambda);
  c.lambda_warmup = j.value("lambda_warmup", c.lambda_warmup);
  c.sigma_scale = j.value("sigma_scale", c.sigma_scale);
  c.decode.window_radius = j.value("decode_window_radius", c.decode.window_radius);
  if (j.contains("augment")) {
    const auto& a = j.at("augment");
    c.augment.rotate_box_prob = a.value("rotate_box_prob", c.augment.rotate_box_prob);
    c.augment.occlude_prob = a.value("occlude_prob", c.augment.occlude_prob);
    c.augment.max_occlusion = a.value("max_occlusion", c.augment.max_occlusion);
    c.augment.noise_prob = a.value("noise_prob", c.augment.noise_prob);
    c.augment.noise_std = a.value("noise_std", c.augment.noise_std);
    c.augment.blur_prob = a.value("blur_prob", c.augment.blur_prob);
    c.augment.background_prob = a.value("background_prob", c.augment.background_prob);
  }
}

template <class T>
TrainSample<T> make_sample(const Scene& scene, std::span<const int> ref_indices, double sigma_scale) {
  TrainSample<T> s;
  const int w = scene.query.intrinsics.width, h = scene.query.intrinsics.height;
  for (int idx : ref_indices) {
    if (idx < 0 || idx >= static_cast<int>(scene.references.size()))
      throw Error(ErrorKind::InvalidArgument, "reference index out of range");
    const View& v = scene.references[idx];
    const auto pts = project_corners(v.pose, v.intrinsics, scene.box);
    const Corners2D c = Corners2D::from_points(pts, v.intrinsics.width, v.intrinsics.height);
    nn::ReferenceView<T> rv;
    rv.image = image_to_tensor<T>(v.image);
    rv.heatmap = encode_heatmap<T>(c, v.intrinsics.height, v.intrinsics.width, sigma_scale);
    s.input.refs.push_back(std::move(rv));
  }
  s.input.query = image_to_tensor<T>(scene.query.image);
  s.gt_corners = scene.gt_corners;
  s.gt_heatmap = encode_heatmap<T>(scene.gt_corners, h, w, sigma_scale);
  return s;
}

std::vector<int> sample_references(const Scene& scene, const nn::ModelConfig& model, std::mt19937_64& rng) {
  const int available = static_cast<int>(scene.references.size());
  const int hi = std::min(model.max_refs, available);
  if (hi < model.min_refs)
    throw Error(ErrorKind::InvalidArgument, "scene has fewer references than the configured minimum");
  std::uniform_int_distribution<int> count_dist(model.min_refs, hi);
  const int n = count_dist(rng);
  std::vector<int> idx(available);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<int> pick(i, available - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double TrainConfig::lambda_at(std::int64_t step) const {
  const double ramp = lambda_warmup * static_cast<double>(optim.total_steps);
  if (ramp <= 0.0) return lambda;
  return lambda * std::min(1.0, static_cast<double>(step) / ramp);
}

template <class T>
LossRecord train_step(std::span<const Scene> batch, nn::ModelParams<T>& params, OptimState<T>& opt,
                      const TrainConfig& config, std::mt19937_64& rng) {
  if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "train_step: empty batch");
  nn::ModelParams<T> grads = nn::zeros_like(params);
  LossRecord rec;
  rec.step = opt.step;
  const double lambda = config.lambda_at(opt.step);
  for (const Scene& raw : batch) {
    const Scene scene = augment_sample(raw, rng, config.augment);
    const std::vector<int> refs = sample_references(scene, config.model, rng);
    const TrainSample<T> sample = make_sample<T>(scene, refs, config.sigma_scale);
    LossComponents parts;
    nn::HeatmapLoss<T> loss_fn = [&](const CornerHeatmapT<T>& pred, std::vector<T>& grad) {
      parts = heatmap_training_loss(pred, sample.gt_heatmap, sample.gt_corners, lambda, config.decode, grad);
      return static_cast<T>(parts.total);
    };
    nn::gradients(loss_fn, sample.input, params, config.model, grads);
    if (!std::isfinite(parts.total))
      throw Error(ErrorKind::NumericFailure, "non-finite loss at step " + std::to_string(opt.step));
    rec.coarse += parts.coarse;
    rec.fine += parts.fine;
    rec.total += parts.total;
  }
  const T inv = T(1) / static_cast<T>(batch.size());
  bool finite = true;
  grads.for_each([&](const std::string&, nn::Tensor<T>& t) {
    for (T& g : t.data) {
      g *= inv;
      finite = finite && std::isfinite(g);
    }
  });
  if (!finite) throw Error(ErrorKind::NumericFailure, "non-finite gradient at step " + std::to_string(opt.step));
  const double n = static_cast<double>(batch.size());
  rec.coarse /= n;
  rec.fine /= n;
  rec.total /= n;
  rec.lr = adamw_update(params, grads, opt, config.optim);
  return rec;
}

template <class T>
LossComponents evaluate_loss(const TrainSample<T>& sample, const nn::ModelParams<T>& params,
                             const TrainConfig& config) {
  const CornerHeatmapT<T> pred = nn::forward(sample.input, params, config.model);
  std::vector<T> grad;
  return heatmap_training_loss(pred, sample.gt_heatmap, sample.gt_corners, config.lambda, config.decode, grad);
}

template TrainSample<float> make_sample<float>(const Scene&, std::span<const int>, double);
template TrainSample<double> make_sample<double>(const Scene&, std::span<const int>, double);
template LossRecord train_step<float>(std::span<const Scene>, nn::ModelParams<float>&, OptimState<float>&,
                                      const TrainConfig&, std::mt19937_64&);
template LossRecord train_step<double>(std::span<const Scene>, nn::ModelParams<double>&, OptimState<double>&,
                                       const TrainConfig&, std::mt19937_64&);
template LossComponents evaluate_loss<float>(const TrainSample<float>&, const nn::ModelParams<float>&,
                                             const TrainConfig&);
template LossComponents evaluate_loss<double>(const TrainSample<double>&, const nn::ModelParams<double>&,
                                              const TrainConfig&);

}  // namespace boxc
