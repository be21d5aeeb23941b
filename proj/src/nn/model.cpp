#include "boxcorner/nn/model.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "boxcorner/error.hpp"
#include "layers.hpp"

namespace boxc::nn {

template <class T>
struct EncoderCache {
  std::vector<T> patches;
  std::vector<T> normed;
  layers::NormCache<T> norm;
  layers::AttentionCache<T> attn;
};

template <class T>
struct BlockCache {
  std::vector<T> h1;
  layers::NormCache<T> n1;
  layers::AttentionCache<T> attn;
  std::vector<T> h2;
  layers::NormCache<T> n2;
  std::vector<T> m;
  std::vector<T> gm;
};

template <class T>
struct Activations {
  std::size_t num_refs = 0;
  std::vector<EncoderCache<T>> encoders;  // references first, query last
  std::vector<std::vector<T>> heatmap_tokens;
  std::vector<BlockCache<T>> blocks;
  std::vector<T> normed;
  layers::NormCache<T> final_norm;
  std::vector<T> probs;
};

template <class T>
ActivationStore<T>::ActivationStore() : impl_(std::make_unique<Activations<T>>()) {}
template <class T>
ActivationStore<T>::~ActivationStore() = default;
template <class T>
ActivationStore<T>::ActivationStore(ActivationStore&&) noexcept = default;
template <class T>
ActivationStore<T>& ActivationStore<T>::operator=(ActivationStore&&) noexcept = default;

namespace {

template <class T>
Tensor<T> make_normal(std::vector<std::size_t> shape, double stddev, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data) v = static_cast<T>(dist(rng));
  return t;
}

template <class T>
LinearParams<T> make_linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {make_normal<T>({in, out}, std::sqrt(2.0 / static_cast<double>(in + out)), rng),
          Tensor<T>({out})};
}

template <class T>
NormParams<T> make_norm(std::size_t d) {
  return {Tensor<T>({d}, T(1)), Tensor<T>({d})};
}

template <class T>
AttentionParams<T> make_attention(std::size_t d, std::mt19937_64& rng) {
  return {make_linear<T>(d, 3 * d, rng), make_linear<T>(d, d, rng)};
}

void check_image(const auto& image, const ModelConfig& c, const char* what) {
  const std::vector<std::size_t> expect{static_cast<std::size_t>(c.image_height),
                                        static_cast<std::size_t>(c.image_width),
                                        static_cast<std::size_t>(c.channels)};
  if (image.shape != expect || image.data.size() != Tensor<float>::count(expect))
    throw Error(ErrorKind::Shape, std::string(what) + " does not match the configured image size");
}

template <class T>
void check_heatmap(const CornerHeatmapT<T>& h, int height, int width) {
  if (h.height != height || h.width != width ||
      h.values.size() != static_cast<std::size_t>(height) * width * kNumCorners)
    throw Error(ErrorKind::Shape, "heatmap does not match the configured image size");
}

// Writes the encoder output (tokens x d) for one image.
template <class T>
void encoder_forward(const Tensor<T>& image, const ModelParams<T>& p, const ModelConfig& c,
                     EncoderCache<T>& cache, T* out) {
  const std::size_t n = c.tokens_per_view();
  const std::size_t d = c.width;
  Tensor<T> tok = patchify(image.ptr(), c.image_height, c.image_width, c.channels, c.patch);
  cache.patches = std::move(tok.data);
  layers::linear_forward(cache.patches.data(), n, p.patch_embed, out);
  cache.normed.resize(n * d);
  layers::norm_forward(out, n, d, p.encoder_norm, cache.normed.data(), cache.norm);
  std::vector<T> a(n * d);
  layers::attention_forward(cache.normed.data(), n, d, c.heads, p.encoder_attn, a.data(), cache.attn);
  for (std::size_t i = 0; i < n * d; ++i) out[i] += a[i];
}

template <class T>
void encoder_backward(const ModelParams<T>& p, const ModelConfig& c, const EncoderCache<T>& cache,
                      const T* d_out, ModelParams<T>& g) {
  const std::size_t n = c.tokens_per_view();
  const std::size_t d = c.width;
  std::vector<T> d_normed(n * d, T(0));
  layers::attention_backward(cache.normed.data(), n, d, c.heads, p.encoder_attn, cache.attn, d_out,
                             g.encoder_attn, d_normed.data());
  std::vector<T> d_f0(d_out, d_out + n * d);
  layers::norm_backward(d_normed.data(), n, d, p.encoder_norm, cache.norm, g.encoder_norm, d_f0.data());
  layers::linear_backward(cache.patches.data(), n, p.patch_embed, d_f0.data(), g.patch_embed,
                          static_cast<T*>(nullptr));
}

template <class T>
void add_row_vector(T* x, std::size_t n, std::size_t d, const Tensor<T>& v) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] += v[j];
}

template <class T>
void accumulate_column_sums(const T* x, std::size_t n, std::size_t d, Tensor<T>& into) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) into[j] += x[i * d + j];
}

template <class T>
T sigmoid(T x) {
  const T s = x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
  return std::clamp(s, std::numeric_limits<T>::min(), std::nextafter(T(1), T(0)));
}

}  // namespace

template <class T>
ModelParams<T> init_params(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = c.width;
  const std::size_t n = c.tokens_per_view();
  ModelParams<T> p;
  p.patch_embed = make_linear<T>(c.image_token_dim(), d, rng);
  p.encoder_norm = make_norm<T>(d);
  p.encoder_attn = make_attention<T>(d, rng);
  p.heatmap_proj = make_linear<T>(c.heatmap_token_dim(), d, rng);
  p.query_tokens = make_normal<T>({n, d}, 0.02, rng);
  p.pos_embed = make_normal<T>({n, d}, 0.02, rng);
  p.ref_segment = make_normal<T>({d}, 0.02, rng);
  p.query_segment = make_normal<T>({d}, 0.02, rng);
  for (int l = 0; l < c.depth; ++l) {
    BlockParams<T> b;
    b.norm1 = make_norm<T>(d);
    b.attn = make_attention<T>(d, rng);
    b.norm2 = make_norm<T>(d);
    b.fc1 = make_linear<T>(d, d * c.mlp_ratio, rng);
    b.fc2 = make_linear<T>(d * c.mlp_ratio, d, rng);
    p.blocks.push_back(std::move(b));
  }
  p.final_norm = make_norm<T>(d);
  const auto hd = static_cast<std::size_t>(c.heatmap_token_dim());
  p.head = {make_normal<T>({d, hd}, 0.02, rng), Tensor<T>({hd})};
  for (auto& b : p.head.bias.data) b = static_cast<T>(kHeadBiasInit);
  return p;
}

template <class T>
Tensor<T> patchify(const T* data, int height, int width, int channels, int p) {
  if (p < 1 || height % p != 0 || width % p != 0)
    throw Error(ErrorKind::Shape, "image size is not divisible by the patch size");
  const int gh = height / p, gw = width / p;
  const std::size_t tok = static_cast<std::size_t>(channels) * p * p;
  Tensor<T> out({static_cast<std::size_t>(gh) * gw, tok});
  for (int py = 0; py < gh; ++py) {
    for (int px = 0; px < gw; ++px) {
      T* dst = out.ptr() + (static_cast<std::size_t>(py) * gw + px) * tok;
      for (int dy = 0; dy < p; ++dy) {
        const T* src = data + (static_cast<std::size_t>(py * p + dy) * width + px * p) * channels;
        std::copy_n(src, static_cast<std::size_t>(p) * channels, dst + static_cast<std::size_t>(dy) * p * channels);
      }
    }
  }
  return out;
}

template <class T>
Tensor<T> patchify_heatmap(const CornerHeatmapT<T>& h, int p) {
  return patchify(h.values.data(), h.height, h.width, kNumCorners, p);
}

template <class T>
CornerHeatmapT<T> unpatchify_heatmap(const Tensor<T>& tokens, int height, int width, int p) {
  if (p < 1 || height % p != 0 || width % p != 0)
    throw Error(ErrorKind::Shape, "heatmap size is not divisible by the patch size");
  const int gh = height / p, gw = width / p;
  const std::size_t tok = static_cast<std::size_t>(kNumCorners) * p * p;
  if (tokens.size() != static_cast<std::size_t>(gh) * gw * tok)
    throw Error(ErrorKind::Shape, "token count does not match the heatmap size");
  CornerHeatmapT<T> h(height, width);
  for (int py = 0; py < gh; ++py) {
    for (int px = 0; px < gw; ++px) {
      const T* src = tokens.ptr() + (static_cast<std::size_t>(py) * gw + px) * tok;
      for (int dy = 0; dy < p; ++dy) {
        T* dst = h.values.data() + (static_cast<std::size_t>(py * p + dy) * width + px * p) * kNumCorners;
        std::copy_n(src + static_cast<std::size_t>(dy) * p * kNumCorners, static_cast<std::size_t>(p) * kNumCorners, dst);
      }
    }
  }
  return h;
}

template <class T>
Tensor<T> patch_embed(const Tensor<T>& image, const ModelParams<T>& params, const ModelConfig& c) {
  c.validate();
  check_image(image, c, "image");
  Tensor<T> out({static_cast<std::size_t>(c.grid_h()), static_cast<std::size_t>(c.grid_w()),
                 static_cast<std::size_t>(c.width)});
  EncoderCache<T> cache;
  encoder_forward(image, params, c, cache, out.ptr());
  return out;
}

template <class T>
Tensor<T> fuse_reference(const Tensor<T>& feat, const CornerHeatmapT<T>& h,
                         const ModelParams<T>& params, const ModelConfig& c) {
  check_heatmap(h, c.image_height, c.image_width);
  const std::size_t n = c.tokens_per_view();
  if (feat.size() != n * c.width) throw Error(ErrorKind::Shape, "feature grid does not match the config");
  Tensor<T> tokens = patchify_heatmap(h, c.patch);
  Tensor<T> out = feat;
  std::vector<T> proj(n * c.width);
  layers::linear_forward(tokens.ptr(), n, params.heatmap_proj, proj.data());
  for (std::size_t i = 0; i < proj.size(); ++i) out[i] += proj[i];
  return out;
}

template <class T>
CornerHeatmapT<T> forward(const ModelInput<T>& input, const ModelParams<T>& p, const ModelConfig& c,
                          ActivationStore<T>* store) {
  c.validate();
  const std::size_t num_refs = input.refs.size();
  if (num_refs < 1 || static_cast<int>(num_refs) > c.max_refs)
    throw Error(ErrorKind::Config, "reference count " + std::to_string(num_refs) +
                                       " outside [1, " + std::to_string(c.max_refs) + "]");
  check_image(input.query, c, "query image");
  for (const auto& r : input.refs) {
    check_image(r.image, c, "reference image");
    check_heatmap(r.heatmap, c.image_height, c.image_width);
  }
  if (p.blocks.size() != static_cast<std::size_t>(c.depth))
    throw Error(ErrorKind::Config, "parameter depth does not match the config");

  Activations<T> local;
  Activations<T>& act = store ? store->get() : local;
  act.num_refs = num_refs;
  act.encoders.assign(num_refs + 1, {});
  act.heatmap_tokens.assign(num_refs, {});
  act.blocks.assign(c.depth, {});

  const std::size_t n = c.tokens_per_view();
  const std::size_t d = c.width;
  const std::size_t seq = (num_refs + 1) * n;
  std::vector<T> x(seq * d);
  std::vector<T> proj(n * d);

  for (std::size_t r = 0; r < num_refs; ++r) {
    T* rows = x.data() + r * n * d;
    encoder_forward(input.refs[r].image, p, c, act.encoders[r], rows);
    act.heatmap_tokens[r] = patchify_heatmap(input.refs[r].heatmap, c.patch).data;
    layers::linear_forward(act.heatmap_tokens[r].data(), n, p.heatmap_proj, proj.data());
    for (std::size_t i = 0; i < n * d; ++i) rows[i] += proj[i] + p.pos_embed[i];
    add_row_vector(rows, n, d, p.ref_segment);
  }
  {
    T* rows = x.data() + num_refs * n * d;
    encoder_forward(input.query, p, c, act.encoders[num_refs], rows);
    for (std::size_t i = 0; i < n * d; ++i) rows[i] += p.query_tokens[i] + p.pos_embed[i];
    add_row_vector(rows, n, d, p.query_segment);
  }

  const std::size_t hidden = d * c.mlp_ratio;
  std::vector<T> tmp(seq * d);
  for (int l = 0; l < c.depth; ++l) {
    const auto& bp = p.blocks[l];
    auto& bc = act.blocks[l];
    bc.h1.resize(seq * d);
    layers::norm_forward(x.data(), seq, d, bp.norm1, bc.h1.data(), bc.n1);
    layers::attention_forward(bc.h1.data(), seq, d, c.heads, bp.attn, tmp.data(), bc.attn);
    for (std::size_t i = 0; i < seq * d; ++i) x[i] += tmp[i];
    bc.h2.resize(seq * d);
    layers::norm_forward(x.data(), seq, d, bp.norm2, bc.h2.data(), bc.n2);
    bc.m.resize(seq * hidden);
    bc.gm.resize(seq * hidden);
    layers::linear_forward(bc.h2.data(), seq, bp.fc1, bc.m.data());
    for (std::size_t i = 0; i < seq * hidden; ++i) bc.gm[i] = layers::gelu(bc.m[i]);
    layers::linear_forward(bc.gm.data(), seq, bp.fc2, tmp.data());
    for (std::size_t i = 0; i < seq * d; ++i) x[i] += tmp[i];
  }

  const T* query_rows = x.data() + num_refs * n * d;
  act.normed.resize(n * d);
  layers::norm_forward(query_rows, n, d, p.final_norm, act.normed.data(), act.final_norm);
  const std::size_t out_dim = c.heatmap_token_dim();
  Tensor<T> logits({n, out_dim});
  layers::linear_forward(act.normed.data(), n, p.head, logits.ptr());
  for (auto& v : logits.data) v = sigmoid(v);
  act.probs = logits.data;
  return unpatchify_heatmap(logits, c.image_height, c.image_width, c.patch);
}

template <class T>
void backward(const ModelInput<T>& input, const ModelParams<T>& p, const ModelConfig& c,
              const ActivationStore<T>& store, const std::vector<T>& d_heatmap, ModelParams<T>& g) {
  const Activations<T>& act = store.get();
  const std::size_t num_refs = act.num_refs;
  if (num_refs != input.refs.size()) throw Error(ErrorKind::Shape, "activations belong to another input");
  const std::size_t n = c.tokens_per_view();
  const std::size_t d = c.width;
  const std::size_t seq = (num_refs + 1) * n;
  const std::size_t hidden = d * c.mlp_ratio;
  const std::size_t out_dim = c.heatmap_token_dim();
  if (d_heatmap.size() != static_cast<std::size_t>(c.image_height) * c.image_width * kNumCorners)
    throw Error(ErrorKind::Shape, "heatmap gradient has the wrong size");

  Tensor<T> d_probs = patchify(d_heatmap.data(), c.image_height, c.image_width, kNumCorners, c.patch);
  for (std::size_t i = 0; i < n * out_dim; ++i) d_probs[i] *= act.probs[i] * (T(1) - act.probs[i]);
  std::vector<T> d_normed(n * d);
  layers::linear_backward(act.normed.data(), n, p.head, d_probs.ptr(), g.head, d_normed.data());

  std::vector<T> dx(seq * d, T(0));
  layers::norm_backward(d_normed.data(), n, d, p.final_norm, act.final_norm, g.final_norm,
                        dx.data() + num_refs * n * d);

  std::vector<T> d_gm(seq * hidden), d_tmp(seq * d);
  for (int l = c.depth - 1; l >= 0; --l) {
    const auto& bp = p.blocks[l];
    const auto& bc = act.blocks[l];
    auto& bg = g.blocks[l];
    layers::linear_backward(bc.gm.data(), seq, bp.fc2, dx.data(), bg.fc2, d_gm.data());
    for (std::size_t i = 0; i < seq * hidden; ++i) d_gm[i] *= layers::gelu_grad(bc.m[i]);
    layers::linear_backward(bc.h2.data(), seq, bp.fc1, d_gm.data(), bg.fc1, d_tmp.data());
    layers::norm_backward(d_tmp.data(), seq, d, bp.norm2, bc.n2, bg.norm2, dx.data());
    std::fill(d_tmp.begin(), d_tmp.end(), T(0));
    layers::attention_backward(bc.h1.data(), seq, d, c.heads, bp.attn, bc.attn, dx.data(), bg.attn,
                               d_tmp.data());
    layers::norm_backward(d_tmp.data(), seq, d, bp.norm1, bc.n1, bg.norm1, dx.data());
  }

  for (std::size_t r = 0; r < num_refs; ++r) {
    const T* rows = dx.data() + r * n * d;
    layers::linear_backward(act.heatmap_tokens[r].data(), n, p.heatmap_proj, rows, g.heatmap_proj,
                            static_cast<T*>(nullptr));
    for (std::size_t i = 0; i < n * d; ++i) g.pos_embed[i] += rows[i];
    accumulate_column_sums(rows, n, d, g.ref_segment);
    encoder_backward(p, c, act.encoders[r], rows, g);
  }
  const T* rows = dx.data() + num_refs * n * d;
  for (std::size_t i = 0; i < n * d; ++i) {
    g.query_tokens[i] += rows[i];
    g.pos_embed[i] += rows[i];
  }
  accumulate_column_sums(rows, n, d, g.query_segment);
  encoder_backward(p, c, act.encoders[num_refs], rows, g);
}

template <class T>
T gradients(const HeatmapLoss<T>& loss_fn, const ModelInput<T>& input, const ModelParams<T>& params,
            const ModelConfig& config, ModelParams<T>& grads) {
  ActivationStore<T> store;
  const CornerHeatmapT<T> pred = forward(input, params, config, &store);
  std::vector<T> d_heatmap(pred.values.size(), T(0));
  const T loss = loss_fn(pred, d_heatmap);
  if (!std::isfinite(static_cast<double>(loss)))
    throw Error(ErrorKind::NumericFailure, "loss is not finite");
  backward(input, params, config, store, d_heatmap, grads);
  return loss;
}

#define BOXC_INSTANTIATE_MODEL(T)                                                                   \
  template class ActivationStore<T>;                                                              \
  template ModelParams<T> init_params<T>(const ModelConfig&, std::uint64_t);                      \
  template Tensor<T> patchify<T>(const T*, int, int, int, int);                                   \
  template Tensor<T> patchify_heatmap<T>(const CornerHeatmapT<T>&, int);                          \
  template CornerHeatmapT<T> unpatchify_heatmap<T>(const Tensor<T>&, int, int, int);              \
  template Tensor<T> patch_embed<T>(const Tensor<T>&, const ModelParams<T>&, const ModelConfig&); \
  template Tensor<T> fuse_reference<T>(const Tensor<T>&, const CornerHeatmapT<T>&,               \
                                       const ModelParams<T>&, const ModelConfig&);                \
  template CornerHeatmapT<T> forward<T>(const ModelInput<T>&, const ModelParams<T>&,              \
                                        const ModelConfig&, ActivationStore<T>*);                 \
  template void backward<T>(const ModelInput<T>&, const ModelParams<T>&, const ModelConfig&,     \
                            const ActivationStore<T>&, const std::vector<T>&, ModelParams<T>&);   \
  template T gradients<T>(const HeatmapLoss<T>&, const ModelInput<T>&, const ModelParams<T>&,     \
                          const ModelConfig&, ModelParams<T>&);

BOXC_INSTANTIATE_MODEL(float)
BOXC_INSTANTIATE_MODEL(double)

#undef BOXC_INSTANTIATE_MODEL

}  // namespace boxc::nn
