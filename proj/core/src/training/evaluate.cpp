#include "geopre/training/evaluate.hpp"

#include "geopre/common/error.hpp"
#include "geopre/nn/checkpoint.hpp"
#include "geopre/nn/ops.hpp"
#include "geopre/training/train.hpp"

#include <cmath>

namespace geopre::training {

namespace fs = std::filesystem;
using dataio::QueryMode;
using dataio::SampleRecord;
using nn::Matrix;

GeometryInput::GeometryInput(const fs::path& encoder_checkpoint) {
  const auto info = nn::read_checkpoint_info(encoder_checkpoint);
  require(info.kind == "vae", Errc::mismatch, encoder_checkpoint.string() + " is not a stage-1 checkpoint");
  const autoenc::VaeConfig vc = autoenc::vae_config(info.config.at("vae"));
  params_ = std::make_unique<nn::ParameterSet<float>>();
  vae_ = std::make_unique<autoenc::PointVae<float>>(vc, *params_, 0);
  nn::load_checkpoint(encoder_checkpoint, *params_);
}

int GeometryInput::latent_dim() const { return vae_->config().latent_dim; }

const GeometryInput::Entry& GeometryInput::entry(const SampleRecord& r) {
  const auto key = std::make_pair(r.split, r.index);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  nn::Tape<float> t(false);
  const auto lat = vae_->encode(t, r.mesh_points);
  Entry e{lat.mu.value(), lat.log_sigma.value().array().exp().matrix()};
  return cache_.emplace(key, std::move(e)).first->second;
}

const Matrix<float>& GeometryInput::operator()(const SampleRecord& r) {
  return latent() ? entry(r).mu : r.mesh_points;
}

const Matrix<float>& GeometryInput::sigma(const SampleRecord& r) {
  require(latent(), Errc::invalid_argument, "sigma requested for raw geometry input");
  return entry(r).sigma;
}

std::uint32_t GeometryInput::encoder_digest() const {
  require(latent(), Errc::invalid_argument, "raw geometry input has no encoder");
  return nn::parameter_digest(*params_, "encoder.");
}

nlohmann::json evaluate_vae(const autoenc::PointVae<float>& vae, std::span<const SampleRecord> records,
                            dataio::ProxyTask proxy, const dataio::ProxyScale& scale) {
  require(!records.empty(), Errc::invalid_argument, "evaluate_vae: empty split");
  const bool occupancy = proxy == dataio::ProxyTask::occupancy;
  const bool sdf = proxy == dataio::ProxyTask::sdf;
  double iou_sum = 0.0, iou_pert_sum = 0.0, recon_sum = 0.0, kl_sum = 0.0;
  long inter = 0, uni = 0;
  for (const auto& r : records) {
    const auto s = dataio::make_eval_sample(r, QueryMode::occ_stage1, nullptr, proxy, scale);
    nn::Tape<float> t(false);
    const auto lat = vae.encode(t, s.geom);
    const auto out = vae.decode(t, lat.mu, s.queries);
    const auto loss = autoenc::vae_loss(out, s.targets, lat, 1.0, occupancy);
    recon_sum += loss.recon.value()(0, 0);
    kl_sum += loss.kl->value()(0, 0);
    if (!occupancy && !sdf) continue;
    // Occupancy from the prediction: logit > 0, or negative signed distance.
    const Eigen::Index nr = r.occ_rand.points.rows();
    const Eigen::Index np = r.occ_perturbed.points.rows();
    Matrix<float> logits = out.value();
    if (sdf) logits = -logits;
    Matrix<float> truth(nr + np, 1);
    for (Eigen::Index i = 0; i < nr; ++i) truth(i, 0) = r.occ_rand.values[i];
    for (Eigen::Index i = 0; i < np; ++i) truth(nr + i, 0) = r.occ_perturbed.values[i];
    const Matrix<float> lr = logits.topRows(nr), tr = truth.topRows(nr);
    const auto [in_r, un_r] = autoenc::iou_counts(lr, tr);
    inter += in_r;
    uni += un_r;
    iou_sum += autoenc::iou(lr, tr);
    if (np > 0) {
      const Matrix<float> lp = logits.bottomRows(np), tp = truth.bottomRows(np);
      iou_pert_sum += autoenc::iou(lp, tp);
    }
  }
  const double n = static_cast<double>(records.size());
  nlohmann::json m = {{"recon", recon_sum / n}, {"kl", kl_sum / n}, {"samples", records.size()}};
  if (occupancy || sdf) {
    m["iou"] = iou_sum / n;
    m["iou_pooled"] = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    m["iou_perturbed"] = iou_pert_sum / n;
  }
  return m;
}

nlohmann::json evaluate_operator(const operators::NeuralOperator<float>& op, GeometryInput& geom,
                                 std::span<const SampleRecord> records, const std::vector<QueryMode>& modes,
                                 const dataio::NormStats& norm) {
  require(!records.empty(), Errc::invalid_argument, "evaluate_operator: empty split");
  nlohmann::json out = nlohmann::json::object();
  for (auto mode : modes) {
    std::vector<double> errs;
    errs.reserve(records.size());
    for (const auto& r : records) {
      const auto s = dataio::make_eval_sample(r, mode, &norm);
      require(s.queries.cols() == op.config().query_dim, Errc::mismatch,
              "checkpoint expects " + std::to_string(op.config().query_dim) + " query channels, dataset gives " +
                  std::to_string(s.queries.cols()));
      nn::Tape<float> t(false);
      const auto pred = op.forward(t, geom(r), s.queries);
      errs.push_back(nn::rel_l2(pred, s.targets).value()(0, 0));
    }
    double mean = 0.0;
    for (double e : errs) mean += e;
    mean /= static_cast<double>(errs.size());
    double var = 0.0;
    for (double e : errs) var += (e - mean) * (e - mean);
    var /= static_cast<double>(errs.size());
    out[dataio::to_string(mode)] = {{"mean", mean}, {"std", std::sqrt(var)}, {"per_sample", errs}};
  }
  return out;
}

std::vector<SampleRecord> physics_records(const std::vector<SampleRecord>& split) {
  std::vector<SampleRecord> out;
  for (const auto& r : split)
    if (r.has_physics()) out.push_back(r);
  return out;
}

nlohmann::json evaluate_checkpoint(const fs::path& checkpoint, const dataio::Dataset& ds,
                                   std::vector<QueryMode> modes) {
  const auto info = nn::read_checkpoint_info(checkpoint);
  const TrainConfig cfg = train_config(info.config);
  if (info.kind == "vae") {
    nn::ParameterSet<float> params;
    autoenc::PointVae<float> vae(cfg.vae, params, 0);
    nn::load_checkpoint(checkpoint, params);
    const auto scale = cfg.proxy == dataio::ProxyTask::occupancy ? dataio::ProxyScale{}
                                                                 : dataio::compute_proxy_scale(ds.train());
    return {{"kind", "vae"}, {"metrics", evaluate_vae(vae, ds.test(), cfg.proxy, scale)}};
  }
  require(info.kind == "operator", Errc::mismatch, checkpoint.string() + ": unknown checkpoint kind '" + info.kind + "'");
  require(ds.norm().has_value(), Errc::config, "dataset has no normalisation statistics");
  if (modes.empty()) modes = cfg.eval_modes;
  nn::ParameterSet<float> params;
  operators::NeuralOperator<float> op(cfg.op, params, 0);
  nn::load_checkpoint(checkpoint, params);
  GeometryInput geom;
  if (cfg.op.geom == operators::GeomSource::latent) {
    const fs::path enc = checkpoint.parent_path() / "encoder.ckpt";
    geom = GeometryInput(fs::exists(enc) ? enc : fs::path(cfg.encoder));
    require(geom.latent_dim() == cfg.op.latent_dim, Errc::mismatch, "encoder latent width does not match checkpoint");
  }
  const auto test = physics_records(ds.test());
  require(!test.empty(), Errc::config, "dataset has no physics records in the test split");
  return {{"kind", "operator"}, {"metrics", evaluate_operator(op, geom, test, modes, *ds.norm())}};
}

}  // namespace geopre::training
