#pragma once

#include <memory>
#include <string>

namespace boxc::nn::detail {

template <class P, class F>
void visit_linear(P& p, const std::string& name, F& f) {
  f(name + ".weight", p.weight);
  f(name + ".bias", p.bias);
}

template <class P, class F>
void visit_norm(P& p, const std::string& name, F& f) {
  f(name + ".gain", p.gain);
  f(name + ".shift", p.shift);
}

template <class P, class F>
void visit_attention(P& p, const std::string& name, F& f) {
  visit_linear(p.qkv, name + ".qkv", f);
  visit_linear(p.out, name + ".out", f);
}

template <class M, class F>
void visit_model(M& m, F& f) {
  visit_linear(m.patch_embed, "patch_embed", f);
  visit_norm(m.encoder_norm, "encoder.norm", f);
  visit_attention(m.encoder_attn, "encoder.attn", f);
  visit_linear(m.heatmap_proj, "heatmap_proj", f);
  f(std::string("query_tokens"), m.query_tokens);
  f(std::string("pos_embed"), m.pos_embed);
  f(std::string("segment.ref"), m.ref_segment);
  f(std::string("segment.query"), m.query_segment);
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    const std::string b = "blocks." + std::to_string(i);
    visit_norm(m.blocks[i].norm1, b + ".norm1", f);
    visit_attention(m.blocks[i].attn, b + ".attn", f);
    visit_norm(m.blocks[i].norm2, b + ".norm2", f);
    visit_linear(m.blocks[i].fc1, b + ".fc1", f);
    visit_linear(m.blocks[i].fc2, b + ".fc2", f);
  }
  visit_norm(m.final_norm, "final_norm", f);
  visit_linear(m.head, "head", f);
}

}  // namespace boxc::nn::detail

namespace boxc::nn {

template <class T>
template <class F>
void ModelParams<T>::for_each(F&& f) {
  detail::visit_model(*this, f);
}

template <class T>
template <class F>
void ModelParams<T>::for_each(F&& f) const {
  detail::visit_model(*this, f);
}

template <class T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Tensor<T>& t) { n += t.size(); });
  return n;
}

template <class T>
ModelParams<T> zeros_like(const ModelParams<T>& p) {
  ModelParams<T> z = p;
  z.for_each([](const std::string&, Tensor<T>& t) { std::fill(t.data.begin(), t.data.end(), T(0)); });
  return z;
}

template <class U, class T>
ModelParams<U> convert_params(const ModelParams<T>& p) {
  ModelParams<U> out;
  out.blocks.resize(p.blocks.size());
  std::vector<const Tensor<T>*> src;
  p.for_each([&](const std::string&, const Tensor<T>& t) { src.push_back(&t); });
  std::size_t i = 0;
  out.for_each([&](const std::string&, Tensor<U>& t) {
    t.shape = src[i]->shape;
    t.data.assign(src[i]->data.begin(), src[i]->data.end());
    ++i;
  });
  return out;
}

}  // namespace boxc::nn
