#pragma once

#include "geopre/nn/layers.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>

namespace geopre::autoenc {

using nn::Matrix;
using nn::ParameterSet;
using nn::Tape;
using nn::Var;

struct VaeConfig {
  int width = 256;       ///< C
  int latent_dim = 32;   ///< C0
  int tokens = 256;      ///< M
  int depth = 6;         ///< self-attention layers on the latent tokens
  int heads = 8;
  int frequencies = 8;   ///< F
  int out_dim = 1;       ///< 1 for occupancy/SDF, 2 for SV
  bool decoder_ff = false;  ///< feed-forward after the query cross-attention
};

/// Reduced sizes used for desk-scale runs: C=128, M=64, C0=16, depth 4, F=6.
VaeConfig desk_vae_config();

nlohmann::json to_json(const VaeConfig& c);
/// Applies the keys present in `j` on top of `base`.
VaeConfig vae_config(const nlohmann::json& j, const VaeConfig& base = {});

/// [sin(2^j pi x_i), cos(2^j pi x_i)] for j < F and each coordinate, laid out
/// per coordinate as F sines then F cosines. n x (2 * d * F).
template <typename T>
Matrix<T> fourier_features(const Matrix<T>& points, int frequencies);

/// Fourier features followed by a trainable affine map to the model width.
template <typename T>
struct PosEmbed {
  int frequencies = 8;
  nn::Linear<T> proj;

  PosEmbed() = default;
  PosEmbed(nn::Builder<T>& b, const std::string& name, int dim, int frequencies, int width);
  Var<T> operator()(Tape<T>& t, const Matrix<T>& points) const;
};

template <typename T>
struct Latent {
  Var<T> mu;
  Var<T> log_sigma;
};

/// Perceiver-style point-cloud VAE. Parameters are named "encoder.*" and
/// "decoder.*"; the encoder part is what Stage 2 freezes.
template <typename T>
class PointVae {
 public:
  PointVae(const VaeConfig& cfg, ParameterSet<T>& params, std::uint64_t seed);

  const VaeConfig& config() const { return cfg_; }

  /// Learnable tokens attend once over the embedded points; per-token heads
  /// give mean and log standard deviation, each M x C0.
  Latent<T> encode(Tape<T>& t, const Matrix<T>& points) const;
  /// Occupancy logits (or regression outputs), q x out_dim.
  Var<T> decode(Tape<T>& t, Var<T> h, const Matrix<T>& queries) const;
  Var<T> embed_points(Tape<T>& t, const Matrix<T>& points) const { return enc_embed_(t, points); }

 private:
  VaeConfig cfg_;
  // encoder
  PosEmbed<T> enc_embed_;
  nn::Parameter<T>* tokens_ = nullptr;
  nn::AttentionBlock<T> enc_cross_;
  nn::FeedForward<T> enc_ff_;
  nn::LayerNorm<T> enc_norm_;
  nn::Linear<T> mu_head_;
  nn::Linear<T> sigma_head_;
  // decoder
  nn::Linear<T> dec_in_;
  std::vector<nn::AttentionBlock<T>> dec_self_;
  std::vector<nn::FeedForward<T>> dec_ff_;
  PosEmbed<T> dec_embed_;
  nn::AttentionBlock<T> dec_cross_;
  std::optional<nn::FeedForward<T>> dec_query_ff_;
  nn::LayerNorm<T> dec_norm_;
  nn::Linear<T> head_;
};

/// h = mu + exp(log_sigma) * eps with eps ~ N(0, 1) drawn from `seed`.
template <typename T>
Var<T> reparameterize(Var<T> mu, Var<T> log_sigma, std::uint64_t seed);

/// Plain-value form on (mean, standard deviation).
template <typename T>
Matrix<T> reparameterize(const Matrix<T>& mu, const Matrix<T>& sigma, std::uint64_t seed);

template <typename T>
struct VaeLoss {
  Var<T> total;
  Var<T> recon;  ///< BCE for occupancy, MSE for SDF/SV
  std::optional<Var<T>> kl;
};

/// recon + lambda * KL; without lambda the KL term is absent (deterministic
/// autoencoder). Occupancy targets must be 0 or 1.
template <typename T>
VaeLoss<T> vae_loss(Var<T> outputs, const Matrix<T>& targets, const Latent<T>& latent, std::optional<double> lambda,
                    bool occupancy = true);

/// Intersection over union of (logit > 0) against the targets; 1 if the
/// union is empty.
template <typename T>
double iou(const Matrix<T>& logits, const Matrix<T>& targets);

/// Intersection and union counts, for pooling over several samples.
template <typename T>
std::pair<long, long> iou_counts(const Matrix<T>& logits, const Matrix<T>& targets);

}  // namespace geopre::autoenc
