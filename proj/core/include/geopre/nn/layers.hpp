#pragma once

#include "geopre/common/rng.hpp"
#include "geopre/nn/ops.hpp"
#include "geopre/nn/tape.hpp"

#include <string>
#include <vector>

namespace geopre::nn {

/// Parameter factory: names parameters "<prefix>.<name>", tags them with a
/// group, and draws initial values from one seeded stream.
template <typename T>
class Builder {
 public:
  Builder(ParameterSet<T>& params, std::string group, std::uint64_t seed)
      : params_(&params), group_(std::move(group)), rng_(make_rng(seed)) {}

  Parameter<T>& xavier(const std::string& name, int fan_in, int fan_out);
  Parameter<T>& normal(const std::string& name, int rows, int cols, double stddev);
  Parameter<T>& constant(const std::string& name, int rows, int cols, double value);

 private:
  ParameterSet<T>* params_;
  std::string group_;
  Rng rng_;
};

template <typename T>
struct Linear {
  Parameter<T>* w = nullptr;
  Parameter<T>* b = nullptr;

  Linear() = default;
  Linear(Builder<T>& b, const std::string& name, int in, int out);
  Var<T> operator()(Tape<T>& t, Var<T> x) const;
};

template <typename T>
struct LayerNorm {
  Parameter<T>* gamma = nullptr;
  Parameter<T>* beta = nullptr;

  LayerNorm() = default;
  LayerNorm(Builder<T>& b, const std::string& name, int width);
  Var<T> operator()(Tape<T>& t, Var<T> x) const;
};

/// Linear layers with GELU between them (none after the last).
template <typename T>
struct Mlp {
  std::vector<Linear<T>> layers;

  Mlp() = default;
  Mlp(Builder<T>& b, const std::string& name, const std::vector<int>& widths);
  Var<T> operator()(Tape<T>& t, Var<T> x) const;
};

/// Pre-norm feed-forward residual branch: LN -> Linear -> GELU -> Linear.
template <typename T>
struct FeedForward {
  LayerNorm<T> norm;
  Linear<T> up;
  Linear<T> down;

  FeedForward() = default;
  FeedForward(Builder<T>& b, const std::string& name, int width, int mult);
  /// Returns x + FF(x).
  Var<T> operator()(Tape<T>& t, Var<T> x) const;
};

enum class AttentionKind { softmax, linear };

/// Multi-head attention with input/output projections. `softmax` is scaled
/// dot-product attention; `linear` is the normalised linear attention
///   q~ = softmax over features of q (per head)
///   k~ = softmax over the sequence of k (per head)
///   out_i = q~_i (k~^T v) / (q~_i . sum_j k~_j).
template <typename T>
struct Attention {
  AttentionKind kind = AttentionKind::softmax;
  int heads = 1;
  Linear<T> q, k, v, o;

  Attention() = default;
  Attention(Builder<T>& b, const std::string& name, int width, int heads, AttentionKind kind,
            int kv_width = -1);
  /// queries: n x width, context: m x kv_width -> n x width.
  Var<T> operator()(Tape<T>& t, Var<T> queries, Var<T> context) const;
};

/// Head-split attention cores on already-projected q, k, v (exposed for tests).
template <typename T>
Var<T> softmax_attention_core(Var<T> q, Var<T> k, Var<T> v, int heads);
template <typename T>
Var<T> linear_attention_core(Var<T> q, Var<T> k, Var<T> v, int heads);

/// Pre-norm attention residual block: x + Attn(LN(x), LN(ctx)).
template <typename T>
struct AttentionBlock {
  LayerNorm<T> norm_q;
  LayerNorm<T> norm_kv;
  Attention<T> attn;
  bool self_attention = false;

  AttentionBlock() = default;
  AttentionBlock(Builder<T>& b, const std::string& name, int width, int heads, AttentionKind kind,
                 bool self_attention, int kv_width = -1);
  Var<T> operator()(Tape<T>& t, Var<T> x, Var<T> context) const;
  Var<T> operator()(Tape<T>& t, Var<T> x) const { return (*this)(t, x, x); }
};

}  // namespace geopre::nn
