#include "geopre/operators/operator.hpp"

#include "geopre/common/error.hpp"
#include "geopre/common/rng.hpp"

namespace geopre::operators {

Backbone parse_backbone(const std::string& s) {
  if (s == "gnot") return Backbone::gnot;
  if (s == "transolver") return Backbone::transolver;
  if (s == "lno") return Backbone::lno;
  fail(Errc::config, "unknown backbone '" + s + "'");
}

std::string to_string(Backbone b) {
  switch (b) {
    case Backbone::gnot: return "gnot";
    case Backbone::transolver: return "transolver";
    case Backbone::lno: return "lno";
  }
  return "?";
}

GeomSource parse_geom_source(const std::string& s) {
  if (s == "raw" || s == "raw_pc") return GeomSource::raw_pc;
  if (s == "latent") return GeomSource::latent;
  fail(Errc::config, "unknown geometry source '" + s + "'");
}

std::string to_string(GeomSource g) { return g == GeomSource::raw_pc ? "raw_pc" : "latent"; }

OperatorConfig default_config(Backbone b) {
  OperatorConfig c;
  c.backbone = b;
  switch (b) {
    case Backbone::gnot:
      c.layers = 4;
      c.ff_mult = 5;
      break;
    case Backbone::transolver:
      c.layers = 9;
      c.ff_mult = 3;
      break;
    case Backbone::lno:
      c.layers = 8;
      c.ff_mult = 3;
      break;
  }
  return c;
}

nlohmann::json to_json(const OperatorConfig& c) {
  return {{"backbone", to_string(c.backbone)}, {"geom", to_string(c.geom)},   {"hidden", c.hidden},
          {"heads", c.heads},                   {"layers", c.layers},          {"slices", c.slices},
          {"lno_tokens", c.lno_tokens},         {"ff_mult", c.ff_mult},        {"query_dim", c.query_dim},
          {"latent_dim", c.latent_dim}};
}

OperatorConfig operator_config(const nlohmann::json& j) {
  OperatorConfig c = default_config(parse_backbone(j.value("backbone", std::string("gnot"))));
  if (j.contains("geom")) c.geom = parse_geom_source(j["geom"].get<std::string>());
  c.hidden = j.value("hidden", c.hidden);
  c.heads = j.value("heads", c.heads);
  c.layers = j.value("layers", c.layers);
  c.slices = j.value("slices", c.slices);
  c.lno_tokens = j.value("lno_tokens", c.lno_tokens);
  c.ff_mult = j.value("ff_mult", c.ff_mult);
  c.query_dim = j.value("query_dim", c.query_dim);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  require(c.hidden > 0 && c.heads > 0 && c.hidden % c.heads == 0, Errc::config,
          "operator hidden width must be divisible by heads");
  require(c.layers >= 1 && c.slices >= 1 && c.lno_tokens >= 1 && c.ff_mult >= 1, Errc::config,
          "invalid operator sizes");
  require(c.query_dim >= 2 && c.latent_dim >= 1, Errc::config, "invalid operator input widths");
  return c;
}

template <typename T>
PhysicsAttention<T>::PhysicsAttention(nn::Builder<T>& b, const std::string& name, int width, int heads, int slices,
                                      int ff_mult)
    : norm(b, name + ".norm", width),
      point_proj(b, name + ".point", width, width),
      slice_proj(b, name + ".slice", width, slices),
      feature_proj(b, name + ".feature", width, width),
      attn(b, name + ".attn", width, heads, nn::AttentionKind::softmax),
      ff(b, name + ".ff", width, ff_mult) {}

template <typename T>
Var<T> PhysicsAttention<T>::slice_weights(Tape<T>& t, Var<T> x) const {
  return nn::softmax_rows(slice_proj(t, point_proj(t, norm(t, x))));
}

template <typename T>
Var<T> PhysicsAttention<T>::operator()(Tape<T>& t, Var<T> x) const {
  const Var<T> u = norm(t, x);
  const Var<T> w = nn::softmax_rows(slice_proj(t, point_proj(t, u)));  // n x S
  const Var<T> f = feature_proj(t, u);                  // n x C
  const Var<T> states = nn::div_rows(nn::matmul_tn(w, f), nn::transpose(nn::col_sum(w)));  // S x C
  const Var<T> z = attn(t, states, states);
  return ff(t, nn::add(x, nn::matmul(w, z)));
}

template <typename T>
NeuralOperator<T>::NeuralOperator(const OperatorConfig& cfg, ParameterSet<T>& params, std::uint64_t seed) : cfg_(cfg) {
  auto builder = [&](const char* group, std::uint64_t k) {
    return nn::Builder<T>(params, group, derive_seed(seed, tag::init, 100 + k));
  };
  const int h = cfg.hidden;
  const auto lin = nn::AttentionKind::linear;
  const auto sm = nn::AttentionKind::softmax;

  auto b_geom = builder("operator.geom", 1);
  if (cfg.geom == GeomSource::raw_pc)
    raw_embed_ = nn::Mlp<T>(b_geom, "operator.geom_embed", {2, h, h});
  else
    latent_adapter_ = nn::Linear<T>(b_geom, "operator.latent_adapter", cfg.latent_dim, h);
  auto b_query = builder("operator.query", 2);
  query_embed_ = nn::Mlp<T>(b_query, "operator.query_embed", {cfg.query_dim, h, h});

  auto b_body = builder("operator.body", 3);
  switch (cfg.backbone) {
    case Backbone::gnot:
      for (int l = 0; l < cfg.layers; ++l) {
        const std::string n = "operator.layer" + std::to_string(l);
        cross_.emplace_back(b_body, n + ".cross", h, cfg.heads, lin, false);
        ff_cross_.emplace_back(b_body, n + ".ff_cross", h, cfg.ff_mult);
        self_.emplace_back(b_body, n + ".self", h, cfg.heads, lin, true);
        ff_self_.emplace_back(b_body, n + ".ff_self", h, cfg.ff_mult);
      }
      break;
    case Backbone::transolver:
      cross_.emplace_back(b_body, "operator.layer0.cross", h, cfg.heads, lin, false);
      ff_cross_.emplace_back(b_body, "operator.layer0.ff", h, cfg.ff_mult);
      for (int l = 1; l < cfg.layers; ++l)
        physics_.emplace_back(b_body, "operator.layer" + std::to_string(l), h, cfg.heads, cfg.slices, cfg.ff_mult);
      break;
    case Backbone::lno:
      branch_ = nn::Mlp<T>(b_body, "operator.branch", {h, h, h});
      lno_tokens_ = &b_body.normal("operator.latent_tokens", cfg.lno_tokens, h, 0.02);
      lno_in_ = nn::AttentionBlock<T>(b_body, "operator.encode", h, cfg.heads, sm, false);
      lno_in_ff_ = nn::FeedForward<T>(b_body, "operator.encode_ff", h, cfg.ff_mult);
      for (int l = 0; l < cfg.layers; ++l) {
        const std::string n = "operator.layer" + std::to_string(l);
        self_.emplace_back(b_body, n + ".self", h, cfg.heads, sm, true);
        ff_self_.emplace_back(b_body, n + ".ff", h, cfg.ff_mult);
      }
      lno_out_ = nn::AttentionBlock<T>(b_body, "operator.decode", h, cfg.heads, sm, false);
      lno_out_ff_ = nn::FeedForward<T>(b_body, "operator.decode_ff", h, cfg.ff_mult);
      break;
  }
  auto b_head = builder("operator.head", 4);
  head_norm_ = nn::LayerNorm<T>(b_head, "operator.head_norm", h);
  head_ = nn::Linear<T>(b_head, "operator.head", h, 1);
}

template <typename T>
Var<T> NeuralOperator<T>::geom_tokens(Tape<T>& t, const Matrix<T>& geom) const {
  if (cfg_.geom == GeomSource::raw_pc) {
    require(geom.cols() == 2 && geom.rows() >= 1, Errc::invalid_argument, "raw geometry must be an N x 2 point cloud");
    return raw_embed_(t, t.constant(geom));
  }
  require(geom.cols() == cfg_.latent_dim && geom.rows() >= 1, Errc::invalid_argument,
          "latent geometry must be M x " + std::to_string(cfg_.latent_dim));
  return latent_adapter_(t, t.constant(geom));
}

template <typename T>
Var<T> NeuralOperator<T>::lno_latents(Tape<T>& t, Var<T> geom) const {
  Var<T> z = lno_in_ff_(t, lno_in_(t, t.param(*lno_tokens_), branch_(t, geom)));
  for (std::size_t l = 0; l < self_.size(); ++l) z = ff_self_[l](t, self_[l](t, z));
  return z;
}

template <typename T>
Var<T> NeuralOperator<T>::forward_tokens(Tape<T>& t, Var<T> geom, const Matrix<T>& queries) const {
  require(queries.cols() == cfg_.query_dim && queries.rows() >= 1, Errc::invalid_argument,
          "queries must be Q x " + std::to_string(cfg_.query_dim));
  Var<T> x = query_embed_(t, t.constant(queries));
  switch (cfg_.backbone) {
    case Backbone::gnot:
      for (std::size_t l = 0; l < cross_.size(); ++l) {
        x = ff_cross_[l](t, cross_[l](t, x, geom));
        x = ff_self_[l](t, self_[l](t, x));
      }
      break;
    case Backbone::transolver:
      x = ff_cross_[0](t, cross_[0](t, x, geom));
      for (const auto& p : physics_) x = p(t, x);
      break;
    case Backbone::lno:
      x = lno_out_ff_(t, lno_out_(t, x, lno_latents(t, geom)));
      break;
  }
  return head_(t, head_norm_(t, x));
}

template <typename T>
Var<T> NeuralOperator<T>::forward(Tape<T>& t, const Matrix<T>& geom, const Matrix<T>& queries) const {
  return forward_tokens(t, geom_tokens(t, geom), queries);
}

std::size_t parameter_count(const OperatorConfig& cfg) {
  ParameterSet<float> ps;
  NeuralOperator<float> op(cfg, ps, 0);
  return ps.scalar_count();
}

template struct PhysicsAttention<float>;
template struct PhysicsAttention<double>;
template class NeuralOperator<float>;
template class NeuralOperator<double>;

}  // namespace geopre::operators
