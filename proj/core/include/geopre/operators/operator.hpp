#pragma once

#include "geopre/nn/layers.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace geopre::operators {

using nn::Matrix;
using nn::ParameterSet;
using nn::Tape;
using nn::Var;

enum class Backbone { gnot, transolver, lno };
enum class GeomSource { raw_pc, latent };

Backbone parse_backbone(const std::string& s);
std::string to_string(Backbone b);
GeomSource parse_geom_source(const std::string& s);
std::string to_string(GeomSource g);

struct OperatorConfig {
  Backbone backbone = Backbone::gnot;
  GeomSource geom = GeomSource::raw_pc;
  int hidden = 128;
  int heads = 4;
  int layers = 4;        ///< gnot 4, transolver 9, lno 8
  int slices = 32;       ///< transolver only
  int lno_tokens = 128;  ///< lno only
  int ff_mult = 5;
  int query_dim = 3;     ///< coordinates + occupancy (+ globals)
  int latent_dim = 32;   ///< C0 of the Stage-1 latents (latent mode)
};

/// Backbone defaults: layer counts as published and a feed-forward
/// expansion that puts each model in the 1.7-1.9M parameter band.
OperatorConfig default_config(Backbone b);

nlohmann::json to_json(const OperatorConfig& c);
/// Starts from default_config(backbone) and applies the keys present in `j`.
OperatorConfig operator_config(const nlohmann::json& j);

/// Physics-attention block: tokens are softly assigned to S slices, slice
/// states attend to each other, and results are scattered back; followed by
/// the residual and feed-forward.
template <typename T>
struct PhysicsAttention {
  nn::LayerNorm<T> norm;
  nn::Linear<T> point_proj;
  nn::Linear<T> slice_proj;
  nn::Linear<T> feature_proj;
  nn::Attention<T> attn;
  nn::FeedForward<T> ff;

  PhysicsAttention() = default;
  PhysicsAttention(nn::Builder<T>& b, const std::string& name, int width, int heads, int slices, int ff_mult);
  Var<T> operator()(Tape<T>& t, Var<T> x) const;
  /// Slice weights (n x S) for inspection.
  Var<T> slice_weights(Tape<T>& t, Var<T> x) const;
};

/// Transformer operator over (geometry tokens, queries) -> Q x 1.
template <typename T>
class NeuralOperator {
 public:
  NeuralOperator(const OperatorConfig& cfg, ParameterSet<T>& params, std::uint64_t seed);

  const OperatorConfig& config() const { return cfg_; }

  /// raw_pc: an N x 2 point cloud; latent: an M x C0 latent set.
  Var<T> geom_tokens(Tape<T>& t, const Matrix<T>& geom) const;
  Var<T> forward(Tape<T>& t, const Matrix<T>& geom, const Matrix<T>& queries) const;
  Var<T> forward_tokens(Tape<T>& t, Var<T> geom, const Matrix<T>& queries) const;

  /// LNO latent stage: processed latent tokens, independent of the queries.
  Var<T> lno_latents(Tape<T>& t, Var<T> geom) const;

 private:
  OperatorConfig cfg_;
  nn::Mlp<T> raw_embed_;
  nn::Linear<T> latent_adapter_;
  nn::Mlp<T> query_embed_;
  nn::LayerNorm<T> head_norm_;
  nn::Linear<T> head_;

  // gnot: per layer a linear cross-attention and a linear self-attention, each with a feed-forward
  std::vector<nn::AttentionBlock<T>> cross_;
  std::vector<nn::AttentionBlock<T>> self_;
  std::vector<nn::FeedForward<T>> ff_cross_;
  std::vector<nn::FeedForward<T>> ff_self_;
  // transolver: cross_[0] + ff_cross_[0], then physics attention
  std::vector<PhysicsAttention<T>> physics_;
  // lno
  nn::Mlp<T> branch_;
  nn::Parameter<T>* lno_tokens_ = nullptr;
  nn::AttentionBlock<T> lno_in_;
  nn::FeedForward<T> lno_in_ff_;
  nn::AttentionBlock<T> lno_out_;
  nn::FeedForward<T> lno_out_ff_;
};

std::size_t parameter_count(const OperatorConfig& cfg);

}  // namespace geopre::operators
