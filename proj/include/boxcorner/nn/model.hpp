#pragma once

// Reference-conditioned corner heatmap network.
//
//   image --patchify--> linear --> +attention residual   (per view encoder)
//   reference tokens = encoder + heatmap projection + position + ref segment
//   query tokens     = encoder + learned query tokens + position + query segment
//   [ref_1 .. ref_N, query] --> L pre-norm blocks (full bidirectional attention)
//   query rows --> norm --> linear --> sigmoid --> unpatchify --> H x W x 8
//
// Every layer has a hand-written backward pass; see gradients().

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "boxcorner/heatmap.hpp"
#include "boxcorner/nn/config.hpp"
#include "boxcorner/nn/tensor.hpp"

namespace boxc::nn {

inline constexpr double kHeadBiasInit = -4.59511985013459;  // logit(0.01)

template <class T>
struct LinearParams {
  Tensor<T> weight;  // in x out
  Tensor<T> bias;    // out
};

template <class T>
struct NormParams {
  Tensor<T> gain;
  Tensor<T> shift;
};

template <class T>
struct AttentionParams {
  LinearParams<T> qkv;
  LinearParams<T> out;
};

template <class T>
struct BlockParams {
  NormParams<T> norm1;
  AttentionParams<T> attn;
  NormParams<T> norm2;
  LinearParams<T> fc1;
  LinearParams<T> fc2;
};

template <class T>
struct ModelParams {
  LinearParams<T> patch_embed;
  NormParams<T> encoder_norm;
  AttentionParams<T> encoder_attn;
  LinearParams<T> heatmap_proj;
  Tensor<T> query_tokens;  // tokens_per_view x d
  Tensor<T> pos_embed;     // tokens_per_view x d
  Tensor<T> ref_segment;   // d
  Tensor<T> query_segment; // d
  std::vector<BlockParams<T>> blocks;
  NormParams<T> final_norm;
  LinearParams<T> head;    // d x 8p^2

  // Visits every parameter tensor in a fixed order with a stable name.
  template <class F>
  void for_each(F&& f);
  template <class F>
  void for_each(F&& f) const;

  std::size_t parameter_count() const;
};

template <class T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed);

// Same layout, every entry zero.
template <class T>
ModelParams<T> zeros_like(const ModelParams<T>& p);

template <class U, class T>
ModelParams<U> convert_params(const ModelParams<T>& p);

template <class T>
struct ReferenceView {
  Tensor<T> image;  // H x W x C
  CornerHeatmapT<T> heatmap;
};

template <class T>
struct ModelInput {
  std::vector<ReferenceView<T>> refs;
  Tensor<T> query;  // H x W x C
};

template <class T>
struct Activations;  // defined in the implementation

template <class T>
class ActivationStore {
 public:
  ActivationStore();
  ~ActivationStore();
  ActivationStore(ActivationStore&&) noexcept;
  ActivationStore& operator=(ActivationStore&&) noexcept;
  Activations<T>& get() { return *impl_; }
  const Activations<T>& get() const { return *impl_; }

 private:
  std::unique_ptr<Activations<T>> impl_;
};

// Lossless rearrangement of H x W x C into (H/p)(W/p) tokens of length C p^2,
// patch-major, each token laid out (dy, dx, c).
template <class T>
Tensor<T> patchify(const T* data, int height, int width, int channels, int p);
template <class T>
Tensor<T> patchify_heatmap(const CornerHeatmapT<T>& h, int p);
template <class T>
CornerHeatmapT<T> unpatchify_heatmap(const Tensor<T>& tokens, int height, int width, int p);

// Encoder features for one image, shape (H/p, W/p, d).
template <class T>
Tensor<T> patch_embed(const Tensor<T>& image, const ModelParams<T>& params, const ModelConfig& config);

// feat + Linear(patchify(h)), same shape as feat.
template <class T>
Tensor<T> fuse_reference(const Tensor<T>& feat, const CornerHeatmapT<T>& h,
                         const ModelParams<T>& params, const ModelConfig& config);

template <class T>
CornerHeatmapT<T> forward(const ModelInput<T>& input, const ModelParams<T>& params,
                          const ModelConfig& config, ActivationStore<T>* store = nullptr);

// Accumulates parameter gradients given d(loss)/d(heatmap values).
template <class T>
void backward(const ModelInput<T>& input, const ModelParams<T>& params, const ModelConfig& config,
              const ActivationStore<T>& store, const std::vector<T>& d_heatmap,
              ModelParams<T>& grads);

// A loss over the predicted heatmap returning its value and writing
// d(loss)/d(values) into the second argument (same layout as values).
template <class T>
using HeatmapLoss = std::function<T(const CornerHeatmapT<T>&, std::vector<T>&)>;

// Runs forward + loss + backward for one sample, accumulating into `grads`.
// Throws ErrorKind::NumericFailure on a non-finite loss.
template <class T>
T gradients(const HeatmapLoss<T>& loss_fn, const ModelInput<T>& input,
            const ModelParams<T>& params, const ModelConfig& config, ModelParams<T>& grads);

}  // namespace boxc::nn

#include "boxcorner/nn/model_params.inl"
