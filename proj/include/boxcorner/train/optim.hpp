#pragma once

#include <cstdint>

#include "boxcorner/nn/model.hpp"

namespace boxc {

struct AdamWConfig {
  double lr = 1e-3;
  double min_lr = 0.0;  // cosine floor reached at the final step
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // decoupled; applied to ".weight" tensors only
  std::int64_t total_steps = 1;
};

// Half-cosine from lr at step 0 to min_lr at step total_steps - 1; constant
// min_lr afterwards.
double cosine_lr(const AdamWConfig& config, std::int64_t step);

template <class T>
struct OptimState {
  nn::ModelParams<T> m;
  nn::ModelParams<T> v;
  std::int64_t step = 0;  // number of updates applied so far
};

template <class T>
OptimState<T> init_optim_state(const nn::ModelParams<T>& params);

bool decays(const std::string& name);

// One AdamW update using the learning rate for opt.step; increments opt.step.
// Returns the learning rate that was used.
template <class T>
double adamw_update(nn::ModelParams<T>& params, const nn::ModelParams<T>& grads, OptimState<T>& opt,
                    const AdamWConfig& config);

}  // namespace boxc
