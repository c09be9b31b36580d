#include "geopre/nn/layers.hpp"

#include "geopre/common/error.hpp"

#include <cmath>

namespace geopre::nn {

template <typename T>
Parameter<T>& Builder<T>::xavier(const std::string& name, int fan_in, int fan_out) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix<T> w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(u(rng_));
  return params_->add(name, group_, std::move(w));
}

template <typename T>
Parameter<T>& Builder<T>::normal(const std::string& name, int rows, int cols, double stddev) {
  std::normal_distribution<double> n(0.0, stddev);
  Matrix<T> w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(n(rng_));
  return params_->add(name, group_, std::move(w));
}

template <typename T>
Parameter<T>& Builder<T>::constant(const std::string& name, int rows, int cols, double value) {
  return params_->add(name, group_, Matrix<T>::Constant(rows, cols, static_cast<T>(value)));
}

template <typename T>
Linear<T>::Linear(Builder<T>& builder, const std::string& name, int in, int out)
    : w(&builder.xavier(name + ".w", in, out)), b(&builder.constant(name + ".b", 1, out, 0.0)) {}

template <typename T>
Var<T> Linear<T>::operator()(Tape<T>& t, Var<T> x) const {
  return linear(x, t.param(*w), t.param(*b));
}

template <typename T>
LayerNorm<T>::LayerNorm(Builder<T>& b, const std::string& name, int width)
    : gamma(&b.constant(name + ".gamma", 1, width, 1.0)), beta(&b.constant(name + ".beta", 1, width, 0.0)) {}

template <typename T>
Var<T> LayerNorm<T>::operator()(Tape<T>& t, Var<T> x) const {
  return layer_norm(x, t.param(*gamma), t.param(*beta));
}

template <typename T>
Mlp<T>::Mlp(Builder<T>& b, const std::string& name, const std::vector<int>& widths) {
  require(widths.size() >= 2, Errc::invalid_argument, "Mlp needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    layers.emplace_back(b, name + "." + std::to_string(i), widths[i], widths[i + 1]);
}

template <typename T>
Var<T> Mlp<T>::operator()(Tape<T>& t, Var<T> x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](t, x);
    if (i + 1 < layers.size()) x = gelu(x);
  }
  return x;
}

template <typename T>
FeedForward<T>::FeedForward(Builder<T>& b, const std::string& name, int width, int mult)
    : norm(b, name + ".norm", width), up(b, name + ".up", width, width * mult), down(b, name + ".down", width * mult, width) {}

template <typename T>
Var<T> FeedForward<T>::operator()(Tape<T>& t, Var<T> x) const {
  return add(x, down(t, gelu(up(t, norm(t, x)))));
}

template <typename T>
Var<T> softmax_attention_core(Var<T> q, Var<T> k, Var<T> v, int heads) {
  const Eigen::Index width = q.cols();
  require(width % heads == 0, Errc::invalid_argument, "attention width not divisible by heads");
  const Eigen::Index d = width / heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(d));
  if (heads == 1) return matmul(softmax_rows(scale(matmul_nt(q, k), inv_sqrt)), v);
  std::vector<Var<T>> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    auto qh = slice_cols(q, h * d, d);
    auto kh = slice_cols(k, h * d, d);
    auto vh = slice_cols(v, h * d, d);
    outs.push_back(matmul(softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt)), vh));
  }
  return concat_cols(outs);
}

template <typename T>
Var<T> linear_attention_core(Var<T> q, Var<T> k, Var<T> v, int heads) {
  const Eigen::Index width = q.cols();
  require(width % heads == 0, Errc::invalid_argument, "attention width not divisible by heads");
  const Eigen::Index d = width / heads;
  auto head = [](Var<T> qh, Var<T> kh, Var<T> vh) {
    auto qs = softmax_rows(qh);
    auto ks = softmax_cols(kh);
    auto context = matmul_tn(ks, vh);                      // d x d
    auto numer = matmul(qs, context);                      // n x d
    auto denom = matmul_nt(qs, col_sum(ks));               // n x 1
    return div_rows(numer, denom);
  };
  if (heads == 1) return head(q, k, v);
  std::vector<Var<T>> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h)
    outs.push_back(head(slice_cols(q, h * d, d), slice_cols(k, h * d, d), slice_cols(v, h * d, d)));
  return concat_cols(outs);
}

template <typename T>
Attention<T>::Attention(Builder<T>& b, const std::string& name, int width, int heads_, AttentionKind kind_,
                        int kv_width)
    : kind(kind_), heads(heads_) {
  require(width % heads_ == 0, Errc::config, name + ": width must be divisible by heads");
  const int kvw = kv_width > 0 ? kv_width : width;
  q = Linear<T>(b, name + ".q", width, width);
  k = Linear<T>(b, name + ".k", kvw, width);
  v = Linear<T>(b, name + ".v", kvw, width);
  o = Linear<T>(b, name + ".o", width, width);
}

template <typename T>
Var<T> Attention<T>::operator()(Tape<T>& t, Var<T> queries, Var<T> context) const {
  auto qp = q(t, queries);
  auto kp = k(t, context);
  auto vp = v(t, context);
  auto core = kind == AttentionKind::softmax ? softmax_attention_core(qp, kp, vp, heads)
                                             : linear_attention_core(qp, kp, vp, heads);
  return o(t, core);
}

template <typename T>
AttentionBlock<T>::AttentionBlock(Builder<T>& b, const std::string& name, int width, int heads, AttentionKind kind,
                                  bool self_attention_, int kv_width)
    : self_attention(self_attention_) {
  const int kvw = kv_width > 0 ? kv_width : width;
  norm_q = LayerNorm<T>(b, name + ".norm_q", width);
  if (!self_attention) norm_kv = LayerNorm<T>(b, name + ".norm_kv", kvw);
  attn = Attention<T>(b, name + ".attn", width, heads, kind, kvw);
}

template <typename T>
Var<T> AttentionBlock<T>::operator()(Tape<T>& t, Var<T> x, Var<T> context) const {
  auto xn = norm_q(t, x);
  auto cn = self_attention ? xn : norm_kv(t, context);
  return add(x, attn(t, xn, cn));
}

#define GEOPRE_INSTANTIATE_LAYERS(T)                                         \
  template class Builder<T>;                                                 \
  template struct Linear<T>;                                                 \
  template struct LayerNorm<T>;                                              \
  template struct Mlp<T>;                                                    \
  template struct FeedForward<T>;                                            \
  template struct Attention<T>;                                              \
  template struct AttentionBlock<T>;                                         \
  template Var<T> softmax_attention_core(Var<T>, Var<T>, Var<T>, int);       \
  template Var<T> linear_attention_core(Var<T>, Var<T>, Var<T>, int);

GEOPRE_INSTANTIATE_LAYERS(float)
GEOPRE_INSTANTIATE_LAYERS(double)

}  // namespace geopre::nn
