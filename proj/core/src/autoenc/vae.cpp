#include "geopre/autoenc/vae.hpp"

#include "geopre/common/error.hpp"
#include "geopre/common/rng.hpp"

#include <cmath>
#include <numbers>

namespace geopre::autoenc {

nlohmann::json to_json(const VaeConfig& c) {
  return {{"width", c.width},   {"latent_dim", c.latent_dim},   {"tokens", c.tokens},
          {"depth", c.depth},   {"heads", c.heads},             {"frequencies", c.frequencies},
          {"out_dim", c.out_dim}, {"decoder_ff", c.decoder_ff}};
}

VaeConfig desk_vae_config() {
  VaeConfig c;
  c.width = 128;
  c.tokens = 64;
  c.latent_dim = 16;
  c.depth = 4;
  c.heads = 4;
  c.frequencies = 6;
  return c;
}

VaeConfig vae_config(const nlohmann::json& j, const VaeConfig& base) {
  VaeConfig c = base;
  c.width = j.value("width", c.width);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.tokens = j.value("tokens", c.tokens);
  c.depth = j.value("depth", c.depth);
  c.heads = j.value("heads", c.heads);
  c.frequencies = j.value("frequencies", c.frequencies);
  c.out_dim = j.value("out_dim", c.out_dim);
  c.decoder_ff = j.value("decoder_ff", c.decoder_ff);
  require(c.width > 0 && c.heads > 0 && c.width % c.heads == 0, Errc::config, "vae width must be divisible by heads");
  require(c.tokens >= 1 && c.latent_dim >= 1 && c.depth >= 0 && c.frequencies >= 1, Errc::config,
          "invalid vae sizes");
  require(c.out_dim == 1 || c.out_dim == 2, Errc::config, "vae out_dim must be 1 or 2");
  return c;
}

template <typename T>
Matrix<T> fourier_features(const Matrix<T>& points, int frequencies) {
  const Eigen::Index n = points.rows(), d = points.cols();
  Matrix<T> out(n, 2 * d * frequencies);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < d; ++c)
      for (int j = 0; j < frequencies; ++j) {
        const double arg = std::ldexp(std::numbers::pi, j) * static_cast<double>(points(i, c));
        out(i, c * 2 * frequencies + j) = static_cast<T>(std::sin(arg));
        out(i, c * 2 * frequencies + frequencies + j) = static_cast<T>(std::cos(arg));
      }
  return out;
}

template <typename T>
PosEmbed<T>::PosEmbed(nn::Builder<T>& b, const std::string& name, int dim, int frequencies_, int width)
    : frequencies(frequencies_), proj(b, name, 2 * dim * frequencies_, width) {}

template <typename T>
Var<T> PosEmbed<T>::operator()(Tape<T>& t, const Matrix<T>& points) const {
  return proj(t, t.constant(fourier_features(points, frequencies)));
}

template <typename T>
PointVae<T>::PointVae(const VaeConfig& cfg, ParameterSet<T>& params, std::uint64_t seed) : cfg_(cfg) {
  auto builder = [&](const char* group, std::uint64_t k) {
    return nn::Builder<T>(params, group, derive_seed(seed, tag::init, k));
  };
  const int C = cfg.width, C0 = cfg.latent_dim;
  const auto sm = nn::AttentionKind::softmax;

  auto b_embed = builder("encoder.embed", 1);
  enc_embed_ = PosEmbed<T>(b_embed, "encoder.embed", 2, cfg.frequencies, C);
  auto b_tokens = builder("encoder.tokens", 2);
  tokens_ = &b_tokens.normal("encoder.tokens", cfg.tokens, C, 0.02);
  auto b_cross = builder("encoder.cross", 3);
  enc_cross_ = nn::AttentionBlock<T>(b_cross, "encoder.cross", C, cfg.heads, sm, false);
  enc_ff_ = nn::FeedForward<T>(b_cross, "encoder.ff", C, 2);
  auto b_heads = builder("encoder.heads", 4);
  enc_norm_ = nn::LayerNorm<T>(b_heads, "encoder.norm", C);
  mu_head_ = nn::Linear<T>(b_heads, "encoder.mu", C, C0);
  sigma_head_ = nn::Linear<T>(b_heads, "encoder.sigma", C, C0);

  auto b_in = builder("decoder.in", 5);
  dec_in_ = nn::Linear<T>(b_in, "decoder.in", C0, C);
  auto b_self = builder("decoder.self", 6);
  for (int l = 0; l < cfg.depth; ++l) {
    const std::string n = "decoder.self" + std::to_string(l);
    dec_self_.emplace_back(b_self, n + ".attn", C, cfg.heads, sm, true);
    dec_ff_.emplace_back(b_self, n + ".ff", C, 2);
  }
  auto b_query = builder("decoder.query", 7);
  dec_embed_ = PosEmbed<T>(b_query, "decoder.embed", 2, cfg.frequencies, C);
  dec_cross_ = nn::AttentionBlock<T>(b_query, "decoder.cross", C, cfg.heads, sm, false);
  if (cfg.decoder_ff) dec_query_ff_ = nn::FeedForward<T>(b_query, "decoder.query_ff", C, 2);
  auto b_head = builder("decoder.head", 8);
  dec_norm_ = nn::LayerNorm<T>(b_head, "decoder.norm", C);
  head_ = nn::Linear<T>(b_head, "decoder.head", C, cfg.out_dim);
}

template <typename T>
Latent<T> PointVae<T>::encode(Tape<T>& t, const Matrix<T>& points) const {
  require(points.rows() >= 1 && points.cols() == 2, Errc::invalid_argument, "encode: need an N x 2 point cloud");
  const Var<T> x = enc_embed_(t, points);
  Var<T> m = enc_cross_(t, t.param(*tokens_), x);
  m = enc_ff_(t, m);
  const Var<T> z = enc_norm_(t, m);
  Latent<T> out{mu_head_(t, z), sigma_head_(t, z)};
  require(out.mu.value().allFinite() && out.log_sigma.value().allFinite(), Errc::numerical,
          "encode: non-finite latent");
  return out;
}

template <typename T>
Var<T> PointVae<T>::decode(Tape<T>& t, Var<T> h, const Matrix<T>& queries) const {
  require(queries.rows() >= 1, Errc::invalid_argument, "decode: need at least one query");
  Var<T> z = dec_in_(t, h);
  for (std::size_t l = 0; l < dec_self_.size(); ++l) z = dec_ff_[l](t, dec_self_[l](t, z));
  Var<T> q = dec_cross_(t, dec_embed_(t, queries), z);
  if (dec_query_ff_) q = (*dec_query_ff_)(t, q);
  return head_(t, dec_norm_(t, q));
}

template <typename T>
Matrix<T> reparameterize(const Matrix<T>& mu, const Matrix<T>& sigma, std::uint64_t seed) {
  require(mu.rows() == sigma.rows() && mu.cols() == sigma.cols(), Errc::invalid_argument,
          "reparameterize: shape mismatch");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix<T> out(mu.rows(), mu.cols());
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    out.data()[i] = mu.data()[i] + sigma.data()[i] * static_cast<T>(n(rng));
  return out;
}

template <typename T>
Var<T> reparameterize(Var<T> mu, Var<T> log_sigma, std::uint64_t seed) {
  const Matrix<T> eps = reparameterize<T>(Matrix<T>::Zero(mu.rows(), mu.cols()),
                                          Matrix<T>::Ones(mu.rows(), mu.cols()), seed);
  return nn::add(mu, nn::mul(nn::exp(log_sigma), mu.tape->constant(eps)));
}

template <typename T>
VaeLoss<T> vae_loss(Var<T> outputs, const Matrix<T>& targets, const Latent<T>& latent, std::optional<double> lambda,
                    bool occupancy) {
  VaeLoss<T> out;
  if (occupancy) {
    require(((targets.array() == T(0)) || (targets.array() == T(1))).all(), Errc::invalid_argument,
            "occupancy targets must be 0 or 1");
    out.recon = nn::bce_with_logits(outputs, targets);
  } else {
    out.recon = nn::mse(outputs, targets);
  }
  out.total = out.recon;
  if (lambda) {
    out.kl = nn::kl_standard_normal(latent.mu, latent.log_sigma);
    if (*lambda != 0.0) out.total = nn::add(out.recon, nn::scale(*out.kl, static_cast<T>(*lambda)));
  }
  return out;
}

template <typename T>
std::pair<long, long> iou_counts(const Matrix<T>& logits, const Matrix<T>& targets) {
  require(logits.size() == targets.size() && logits.size() > 0, Errc::invalid_argument, "iou: size mismatch");
  long inter = 0, uni = 0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const bool p = logits.data()[i] > T(0);
    const bool y = targets.data()[i] > T(0.5);
    inter += p && y;
    uni += p || y;
  }
  return {inter, uni};
}

template <typename T>
double iou(const Matrix<T>& logits, const Matrix<T>& targets) {
  const auto [inter, uni] = iou_counts(logits, targets);
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

#define GEOPRE_INSTANTIATE(T)                                                                            \
  template Matrix<T> fourier_features(const Matrix<T>&, int);                                            \
  template struct PosEmbed<T>;                                                                           \
  template class PointVae<T>;                                                                            \
  template Var<T> reparameterize(Var<T>, Var<T>, std::uint64_t);                                         \
  template Matrix<T> reparameterize(const Matrix<T>&, const Matrix<T>&, std::uint64_t);                  \
  template VaeLoss<T> vae_loss(Var<T>, const Matrix<T>&, const Latent<T>&, std::optional<double>, bool); \
  template std::pair<long, long> iou_counts(const Matrix<T>&, const Matrix<T>&);                         \
  template double iou(const Matrix<T>&, const Matrix<T>&);

GEOPRE_INSTANTIATE(float)
GEOPRE_INSTANTIATE(double)

}  // namespace geopre::autoenc
