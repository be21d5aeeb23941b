#include "boxcorner/train/optim.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "boxcorner/error.hpp"

namespace boxc {
namespace {

template <class T>
std::vector<nn::Tensor<T>*> tensors(nn::ModelParams<T>& p) {
  std::vector<nn::Tensor<T>*> out;
  p.for_each([&](const std::string&, nn::Tensor<T>& t) { out.push_back(&t); });
  return out;
}

template <class T>
std::vector<const nn::Tensor<T>*> tensors(const nn::ModelParams<T>& p) {
  std::vector<const nn::Tensor<T>*> out;
  p.for_each([&](const std::string&, const nn::Tensor<T>& t) { out.push_back(&t); });
  return out;
}

}  // namespace

double cosine_lr(const AdamWConfig& config, std::int64_t step) {
  if (step < 0) throw Error(ErrorKind::InvalidArgument, "cosine_lr: negative step");
  const std::int64_t last = config.total_steps - 1;
  if (last <= 0) return step == 0 ? config.lr : config.min_lr;
  if (step >= last) return config.min_lr;
  const double progress = static_cast<double>(step) / static_cast<double>(last);
  return config.min_lr + 0.5 * (config.lr - config.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

bool decays(const std::string& name) {
  const std::string suffix = ".weight";
  return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
}

template <class T>
OptimState<T> init_optim_state(const nn::ModelParams<T>& params) {
  OptimState<T> s;
  s.m = nn::zeros_like(params);
  s.v = nn::zeros_like(params);
  return s;
}

template <class T>
double adamw_update(nn::ModelParams<T>& params, const nn::ModelParams<T>& grads, OptimState<T>& opt,
                    const AdamWConfig& config) {
  std::vector<std::string> names;
  params.for_each([&](const std::string& n, const nn::Tensor<T>&) { names.push_back(n); });
  auto p = tensors(params);
  auto g = tensors(grads);
  auto m = tensors(opt.m);
  auto v = tensors(opt.v);
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
    throw Error(ErrorKind::Shape, "adamw_update: parameter layouts differ");

  const double lr = cosine_lr(config, opt.step);
  const std::int64_t t = opt.step + 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  const T b1 = static_cast<T>(config.beta1), b2 = static_cast<T>(config.beta2);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::size_t n = p[i]->size();
    if (g[i]->size() != n || m[i]->size() != n || v[i]->size() != n)
      throw Error(ErrorKind::Shape, "adamw_update: shape mismatch in " + names[i]);
    const double wd = decays(names[i]) ? config.weight_decay : 0.0;
    T* pd = p[i]->ptr();
    const T* gd = g[i]->ptr();
    T* md = m[i]->ptr();
    T* vd = v[i]->ptr();
    for (std::size_t j = 0; j < n; ++j) {
      md[j] = b1 * md[j] + (T(1) - b1) * gd[j];
      vd[j] = b2 * vd[j] + (T(1) - b2) * gd[j] * gd[j];
      const double mh = md[j] / bc1;
      const double vh = vd[j] / bc2;
      const double upd = mh / (std::sqrt(vh) + config.eps) + wd * pd[j];
      pd[j] = static_cast<T>(pd[j] - lr * upd);
    }
  }
  opt.step = t;
  return lr;
}

template OptimState<float> init_optim_state<float>(const nn::ModelParams<float>&);
template OptimState<double> init_optim_state<double>(const nn::ModelParams<double>&);
template double adamw_update<float>(nn::ModelParams<float>&, const nn::ModelParams<float>&, OptimState<float>&,
                                    const AdamWConfig&);
template double adamw_update<double>(nn::ModelParams<double>&, const nn::ModelParams<double>&,
                                     OptimState<double>&, const AdamWConfig&);

}  // namespace boxc
