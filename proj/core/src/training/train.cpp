#include "geopre/training/train.hpp"

#include "geopre/common/container.hpp"
#include "geopre/common/error.hpp"
#include "geopre/common/rng.hpp"
#include "geopre/nn/checkpoint.hpp"
#include "geopre/nn/optim.hpp"
#include "geopre/training/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace geopre::training {

namespace fs = std::filesystem;
using dataio::QueryMode;
using dataio::SampleRecord;
using nn::Var;

namespace {

const std::set<std::string> kKeys = {
    "stage",    "epochs",     "batch_size", "lr_max",       "lr_min",        "weight_decay",          "grad_clip",
    "kl_weight", "seed",      "dataset",    "desk_profile", "counts",        "proxy",                 "train_records",
    "geometry_only_records",  "eval_every", "vae",          "operator",      "encoder",               "latent_mode",
    "train_mode", "eval_modes"};

std::string latent_mode_name(LatentMode m) { return m == LatentMode::mean ? "mean" : "sample"; }

LatentMode parse_latent_mode(const std::string& s) {
  if (s == "mean") return LatentMode::mean;
  if (s == "sample") return LatentMode::sample;
  fail(Errc::config, "latent_mode must be mean or sample, got '" + s + "'");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void say(const LogFn& log, const std::string& s) {
  if (log) log(s);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

nn::CheckpointInfo info_for(const TrainConfig& cfg, std::int64_t step, const char* kind) {
  return {to_json(cfg), step, kind};
}

// Per-epoch cosine with the learning rate of epoch e at schedule step e.
double epoch_lr(const TrainConfig& cfg, int epoch) { return nn::lr_schedule(epoch, cfg.epochs, cfg.lr_max, cfg.lr_min); }

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

[[noreturn]] void abort_non_finite(const fs::path& out, int epoch, std::int64_t record, const nlohmann::json& detail) {
  nlohmann::json diag = {{"error", "non-finite loss"}, {"epoch", epoch}, {"record", record}, {"detail", detail},
                         {"last_good_checkpoint", "last.ckpt"}};
  write_text_atomic(out / "failure.json", diag.dump(2));
  fail(Errc::numerical, "non-finite loss at epoch " + std::to_string(epoch) + ", record " + std::to_string(record) +
                            " (see failure.json; last.ckpt holds the last finite epoch)");
}

}  // namespace

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json modes = nlohmann::json::array();
  for (auto m : c.eval_modes) modes.push_back(dataio::to_string(m));
  return {{"stage", c.stage},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr_max", c.lr_max},
          {"lr_min", c.lr_min},
          {"weight_decay", c.weight_decay},
          {"grad_clip", c.grad_clip},
          {"kl_weight", c.kl_weight ? nlohmann::json(*c.kl_weight) : nlohmann::json()},
          {"seed", c.seed},
          {"dataset", c.dataset},
          {"desk_profile", c.desk_profile},
          {"counts",
           {{"geom", c.counts.geom},
            {"occ_rand", c.counts.occ_rand},
            {"occ_perturbed", c.counts.occ_perturbed},
            {"physics", c.counts.physics}}},
          {"proxy", dataio::to_string(c.proxy)},
          {"train_records", c.train_records},
          {"geometry_only_records", c.geometry_only_records},
          {"eval_every", c.eval_every},
          {"vae", autoenc::to_json(c.vae)},
          {"operator", operators::to_json(c.op)},
          {"encoder", c.encoder},
          {"latent_mode", latent_mode_name(c.latent_mode)},
          {"train_mode", dataio::to_string(c.train_mode)},
          {"eval_modes", modes}};
}

TrainConfig train_config(const nlohmann::json& j) {
  require(j.is_object(), Errc::config, "training config must be an object");
  for (const auto& [k, v] : j.items()) require(kKeys.contains(k), Errc::config, "unknown training config key '" + k + "'");
  TrainConfig c;
  try {
    c.stage = j.value("stage", 1);
    require(c.stage == 1 || c.stage == 2, Errc::config, "stage must be 1 or 2");
    c.epochs = j.value("epochs", c.stage == 1 ? 400 : 200);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr_max = j.value("lr_max", c.lr_max);
    c.lr_min = j.value("lr_min", c.lr_min);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    if (j.contains("kl_weight")) {
      if (j["kl_weight"].is_null())
        c.kl_weight.reset();
      else
        c.kl_weight = j["kl_weight"].get<double>();
    }
    c.seed = j.value("seed", c.seed);
    c.dataset = j.value("dataset", c.dataset);
    c.desk_profile = j.value("desk_profile", c.desk_profile);
    if (j.contains("counts")) {
      const auto& k = j["counts"];
      c.counts.geom = k.value("geom", c.counts.geom);
      c.counts.occ_rand = k.value("occ_rand", c.counts.occ_rand);
      c.counts.occ_perturbed = k.value("occ_perturbed", c.counts.occ_perturbed);
      c.counts.physics = k.value("physics", c.counts.physics);
    }
    c.proxy = dataio::parse_proxy_task(j.value("proxy", std::string("occupancy")));
    c.train_records = j.value("train_records", c.train_records);
    c.geometry_only_records = j.value("geometry_only_records", c.geometry_only_records);
    c.eval_every = j.value("eval_every", c.eval_every);
    const autoenc::VaeConfig base = c.desk_profile ? autoenc::desk_vae_config() : autoenc::VaeConfig{};
    c.vae = autoenc::vae_config(j.value("vae", nlohmann::json::object()), base);
    c.vae.out_dim = c.proxy == dataio::ProxyTask::sv ? 2 : 1;
    c.op = operators::operator_config(j.value("operator", nlohmann::json::object()));
    c.encoder = j.value("encoder", c.encoder);
    c.latent_mode = parse_latent_mode(j.value("latent_mode", std::string("mean")));
    c.train_mode = dataio::parse_query_mode(j.value("train_mode", std::string("mixed")));
    if (j.contains("eval_modes")) {
      c.eval_modes.clear();
      for (const auto& m : j["eval_modes"]) c.eval_modes.push_back(dataio::parse_query_mode(m.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, std::string("training config: ") + e.what());
  }
  require(c.epochs >= 1, Errc::config, "epochs must be at least 1");
  require(c.batch_size >= 1, Errc::config, "batch_size must be at least 1");
  require(c.lr_min >= 0 && c.lr_min <= c.lr_max, Errc::config, "need 0 <= lr_min <= lr_max");
  require(c.weight_decay >= 0 && c.grad_clip > 0, Errc::config, "weight_decay must be >= 0 and grad_clip > 0");
  require(!c.kl_weight || *c.kl_weight >= 0, Errc::config, "kl_weight must be non-negative");
  require(c.counts.geom >= 1 && c.counts.occ_rand >= 0 && c.counts.occ_perturbed >= 0 && c.counts.physics >= 1,
          Errc::config, "invalid batch counts");
  require(c.counts.occ_rand + c.counts.occ_perturbed >= 1, Errc::config, "stage-1 batches need queries");
  require(c.train_mode != QueryMode::occ_stage1, Errc::config, "train_mode must be mesh, random or mixed");
  for (auto m : c.eval_modes)
    require(m == QueryMode::mesh || m == QueryMode::random, Errc::config, "eval_modes must be mesh or random");
  require(c.eval_every >= 0, Errc::config, "eval_every must be >= 0");
  return c;
}

nlohmann::json to_json(const RunResult& r) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& e : r.curve) {
    nlohmann::json row = {{"epoch", e.epoch}, {"lr", e.lr},       {"loss", e.loss},
                          {"recon", e.recon}, {"grad_norm", e.grad_norm}, {"seconds", e.seconds}};
    if (e.kl) row["kl"] = *e.kl;
    if (!e.test.is_null()) row["test"] = e.test;
    curve.push_back(std::move(row));
  }
  nlohmann::json j = {{"stage", r.stage},
                      {"config", r.config},
                      {"curve", curve},
                      {"metrics", r.metrics},
                      {"wall_seconds", r.wall_seconds},
                      {"checkpoint", r.checkpoint},
                      {"dataset_checksum", r.dataset_checksum}};
  if (r.encoder_digest) j["encoder_digest"] = *r.encoder_digest;
  return j;
}

RunResult run_result(const nlohmann::json& j) {
  RunResult r;
  try {
    r.stage = j.at("stage").get<int>();
    r.config = j.at("config");
    for (const auto& e : j.at("curve")) {
      EpochStats s;
      s.epoch = e.at("epoch").get<int>();
      s.lr = e.at("lr").get<double>();
      s.loss = e.at("loss").get<double>();
      s.recon = e.value("recon", 0.0);
      if (e.contains("kl")) s.kl = e["kl"].get<double>();
      s.grad_norm = e.value("grad_norm", 0.0);
      s.seconds = e.value("seconds", 0.0);
      if (e.contains("test")) s.test = e["test"];
      r.curve.push_back(std::move(s));
    }
    r.metrics = j.at("metrics");
    r.wall_seconds = j.value("wall_seconds", 0.0);
    r.checkpoint = j.value("checkpoint", std::string{});
    r.dataset_checksum = j.value("dataset_checksum", std::uint32_t{0});
    if (j.contains("encoder_digest")) r.encoder_digest = j["encoder_digest"].get<std::uint32_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, std::string("run result: ") + e.what());
  }
  return r;
}

void write_run_result(const fs::path& path, const RunResult& r) { write_text_atomic(path, to_json(r).dump(2) + "\n"); }

RunResult read_run_result(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return run_result(nlohmann::json::parse(bytes.begin(), bytes.end()));
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::config, path.string() + ": " + e.what());
  }
}

std::optional<RunResult> reusable_result(const fs::path& dir, const TrainConfig& cfg, std::uint32_t dataset_checksum) {
  const fs::path p = dir / "result.json";
  if (!fs::exists(p)) return std::nullopt;
  try {
    RunResult r = read_run_result(p);
    if (r.config != to_json(cfg) || r.dataset_checksum != dataset_checksum) return std::nullopt;
    if (!fs::exists(dir / r.checkpoint)) return std::nullopt;
    if (cfg.stage == 2 && cfg.op.geom == operators::GeomSource::latent) {
      // Same path is not enough: the encoder file may have been retrained.
      if (!r.encoder_digest || !fs::is_regular_file(cfg.encoder)) return std::nullopt;
      if (GeometryInput(cfg.encoder).encoder_digest() != *r.encoder_digest) return std::nullopt;
    }
    return r;
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<std::size_t> stage1_selection(const dataio::Dataset& ds, int train_records, int geometry_only_records) {
  const auto& train = ds.train();
  const std::size_t limit = train_records < 0 ? train.size() : std::min<std::size_t>(train.size(), train_records);
  std::vector<std::size_t> sel;
  int geometry_only = 0;
  for (std::size_t i = 0; i < limit; ++i) {
    if (!train[i].has_physics()) {
      if (geometry_only_records >= 0 && geometry_only >= geometry_only_records) continue;
      ++geometry_only;
    }
    sel.push_back(i);
  }
  require(!sel.empty(), Errc::config, "stage-1 selection is empty");
  return sel;
}

RunResult pretrain_stage1(const TrainConfig& cfg, const dataio::Dataset& ds, const fs::path& out, const LogFn& log) {
  require(cfg.stage == 1, Errc::config, "pretrain_stage1 needs a stage-1 config");
  require(!ds.test().empty(), Errc::config, "dataset has an empty test split");
  fs::create_directories(out);
  const auto t0 = std::chrono::steady_clock::now();

  const auto sel = stage1_selection(ds, cfg.train_records, cfg.geometry_only_records);
  const bool occupancy = cfg.proxy == dataio::ProxyTask::occupancy;
  const dataio::ProxyScale scale = occupancy ? dataio::ProxyScale{} : dataio::compute_proxy_scale(ds.train());

  nn::ParameterSet<float> params;
  autoenc::PointVae<float> vae(cfg.vae, params, derive_seed(cfg.seed, tag::init));
  nn::AdamW<float> opt({.weight_decay = cfg.weight_decay});
  params.zero_grad();
  nn::save_checkpoint(out / "last.ckpt", params, info_for(cfg, 0, "vae"));

  RunResult result;
  result.stage = 1;
  result.config = to_json(cfg);
  result.dataset_checksum = dataio::dataset_checksum(ds.dir());
  say(log, fmt("stage 1: %zu train geometries, %zu test, %zu parameters", sel.size(), ds.test().size(),
               params.scalar_count()));

  const std::size_t n = sel.size();
  const std::size_t B = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto te = std::chrono::steady_clock::now();
    const double lr = epoch_lr(cfg, epoch);
    const auto order = shuffled(n, derive_seed(cfg.seed, tag::shuffle, static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0, recon_sum = 0.0, kl_sum = 0.0, gn_sum = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < n; start += B) {
      const std::size_t end = std::min(n, start + B);
      const float inv = 1.0f / static_cast<float>(end - start);
      params.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const SampleRecord& rec = ds.train()[sel[order[k]]];
        const std::uint64_t draw = derive_seed(cfg.seed, tag::batch, static_cast<std::uint64_t>(epoch) * n + k);
        const auto s = dataio::make_query_sample(rec, QueryMode::occ_stage1, cfg.counts, nullptr, draw, cfg.proxy, scale);
        nn::Tape<float> t;
        const auto lat = vae.encode(t, s.geom);
        const auto h = cfg.kl_weight ? autoenc::reparameterize(lat.mu, lat.log_sigma, derive_seed(draw, tag::latent_noise))
                                     : lat.mu;
        const auto loss = autoenc::vae_loss(vae.decode(t, h, s.queries), s.targets, lat, cfg.kl_weight, occupancy);
        const double total = loss.total.value()(0, 0);
        const double kl = loss.kl ? double(loss.kl->value()(0, 0)) : 0.0;
        if (!std::isfinite(total))
          abort_non_finite(out, epoch, rec.index, {{"loss", total}, {"recon", loss.recon.value()(0, 0)}, {"kl", kl}});
        t.backward(loss.total, inv);
        loss_sum += total;
        recon_sum += loss.recon.value()(0, 0);
        kl_sum += kl;
      }
      const double gn = nn::clip_grad_norm(params, cfg.grad_clip);
      if (!std::isfinite(gn)) abort_non_finite(out, epoch, -1, {{"grad_norm", gn}});
      opt.step(params, lr);
      gn_sum += gn;
      ++steps;
    }
    EpochStats es;
    es.epoch = epoch;
    es.lr = lr;
    es.loss = loss_sum / n;
    es.recon = recon_sum / n;
    if (cfg.kl_weight) es.kl = kl_sum / n;
    es.grad_norm = gn_sum / steps;
    const bool last = epoch + 1 == cfg.epochs;
    if (!last && cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0)
      es.test = evaluate_vae(vae, ds.test(), cfg.proxy, scale);
    es.seconds = seconds_since(te);
    nn::save_checkpoint(out / "last.ckpt", params, info_for(cfg, opt.steps(), "vae"));
    std::string line = fmt("epoch %d/%d lr %.3g loss %.5f recon %.5f", epoch + 1, cfg.epochs, lr, es.loss, es.recon);
    if (es.kl) line += fmt(" kl %.4f", *es.kl);
    if (!es.test.is_null() && es.test.contains("iou")) line += fmt(" test iou %.4f", es.test["iou"].get<double>());
    say(log, line + fmt(" (%.1fs)", es.seconds));
    result.curve.push_back(std::move(es));
  }

  nn::save_checkpoint(out / "model.ckpt", params, info_for(cfg, opt.steps(), "vae"));
  result.checkpoint = "model.ckpt";
  result.metrics = evaluate_vae(vae, ds.test(), cfg.proxy, scale);
  result.curve.back().test = result.metrics;
  result.wall_seconds = seconds_since(t0);
  write_run_result(out / "result.json", result);
  say(log, "stage 1 test metrics: " + result.metrics.dump());
  return result;
}

RunResult train_stage2(const TrainConfig& cfg, const dataio::Dataset& ds, const fs::path& out, const LogFn& log) {
  require(cfg.stage == 2, Errc::config, "train_stage2 needs a stage-2 config");
  require(ds.norm().has_value(), Errc::config, "dataset has no normalisation statistics (norm.json)");
  const bool latent = cfg.op.geom == operators::GeomSource::latent;
  require(!latent || !cfg.encoder.empty(), Errc::config, "latent geometry input requires an encoder checkpoint");
  require(!latent || fs::is_regular_file(cfg.encoder), Errc::io, "encoder checkpoint not found: " + cfg.encoder);
  fs::create_directories(out);
  const auto t0 = std::chrono::steady_clock::now();

  const auto train = physics_records(ds.train());
  const auto test = physics_records(ds.test());
  require(!train.empty(), Errc::config, "dataset has no physics records in the train split");
  require(!test.empty(), Errc::config, "dataset has no physics records in the test split");
  const dataio::NormStats& norm = *ds.norm();

  GeometryInput geom;
  if (latent) {
    if (fs::absolute(cfg.encoder) != fs::absolute(out / "encoder.ckpt"))
      fs::copy_file(cfg.encoder, out / "encoder.ckpt", fs::copy_options::overwrite_existing);
    geom = GeometryInput(out / "encoder.ckpt");
  }
  const std::uint32_t digest_before = latent ? geom.encoder_digest() : 0;

  operators::OperatorConfig oc = cfg.op;
  oc.query_dim = static_cast<int>(3 + (train.front().globals ? train.front().globals->cols() : 0));
  if (latent) oc.latent_dim = geom.latent_dim();
  TrainConfig resolved = cfg;
  resolved.op = oc;

  nn::ParameterSet<float> params;
  operators::NeuralOperator<float> op(oc, params, derive_seed(cfg.seed, tag::init));
  nn::AdamW<float> opt({.weight_decay = cfg.weight_decay});
  params.zero_grad();
  nn::save_checkpoint(out / "last.ckpt", params, info_for(resolved, 0, "operator"));

  RunResult result;
  result.stage = 2;
  result.config = to_json(cfg);
  result.dataset_checksum = dataio::dataset_checksum(ds.dir());
  say(log, fmt("stage 2: %s/%s, %zu train, %zu test, %zu parameters", operators::to_string(oc.backbone).c_str(),
               operators::to_string(oc.geom).c_str(), train.size(), test.size(), params.scalar_count()));

  const std::size_t n = train.size();
  const std::size_t B = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto te = std::chrono::steady_clock::now();
    const double lr = epoch_lr(cfg, epoch);
    const auto order = shuffled(n, derive_seed(cfg.seed, tag::shuffle, static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0, gn_sum = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < n; start += B) {
      const std::size_t end = std::min(n, start + B);
      const float inv = 1.0f / static_cast<float>(end - start);
      params.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const SampleRecord& rec = train[order[k]];
        const std::uint64_t draw = derive_seed(cfg.seed, tag::batch, static_cast<std::uint64_t>(epoch) * n + k);
        const auto s = dataio::make_query_sample(rec, cfg.train_mode, cfg.counts, &norm, draw);
        nn::Tape<float> t;
        Var<float> pred;
        if (!latent) {
          pred = op.forward(t, s.geom, s.queries);
        } else if (cfg.latent_mode == LatentMode::mean) {
          pred = op.forward(t, geom(rec), s.queries);
        } else {
          pred = op.forward(t, autoenc::reparameterize(geom(rec), geom.sigma(rec), derive_seed(draw, tag::latent_noise)),
                            s.queries);
        }
        const auto loss = nn::rel_l2(pred, s.targets);
        const double v = loss.value()(0, 0);
        if (!std::isfinite(v)) abort_non_finite(out, epoch, rec.index, {{"loss", v}});
        t.backward(loss, inv);
        loss_sum += v;
      }
      const double gn = nn::clip_grad_norm(params, cfg.grad_clip);
      if (!std::isfinite(gn)) abort_non_finite(out, epoch, -1, {{"grad_norm", gn}});
      opt.step(params, lr);
      gn_sum += gn;
      ++steps;
    }
    EpochStats es;
    es.epoch = epoch;
    es.lr = lr;
    es.loss = loss_sum / n;
    es.recon = es.loss;
    es.grad_norm = gn_sum / steps;
    const bool last = epoch + 1 == cfg.epochs;
    if (!last && cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0)
      es.test = evaluate_operator(op, geom, test, cfg.eval_modes, norm);
    es.seconds = seconds_since(te);
    nn::save_checkpoint(out / "last.ckpt", params, info_for(resolved, opt.steps(), "operator"));
    std::string line = fmt("epoch %d/%d lr %.3g rel_l2 %.5f", epoch + 1, cfg.epochs, lr, es.loss);
    for (auto m : cfg.eval_modes) {
      const auto key = dataio::to_string(m);
      if (!es.test.is_null()) line += fmt(" test %s %.5f", key.c_str(), es.test[key]["mean"].get<double>());
    }
    say(log, line + fmt(" (%.1fs)", es.seconds));
    result.curve.push_back(std::move(es));
  }

  nn::save_checkpoint(out / "model.ckpt", params, info_for(resolved, opt.steps(), "operator"));
  result.checkpoint = "model.ckpt";
  result.metrics = evaluate_operator(op, geom, test, cfg.eval_modes, norm);
  result.curve.back().test = result.metrics;
  if (latent) {
    const std::uint32_t after = geom.encoder_digest();
    require(after == digest_before, Errc::numerical, "encoder parameters changed during stage 2");
    result.encoder_digest = after;
  }
  result.wall_seconds = seconds_since(t0);
  write_run_result(out / "result.json", result);
  std::string line = "stage 2 test rel_l2:";
  for (auto m : cfg.eval_modes) {
    const auto key = dataio::to_string(m);
    line += fmt(" %s %.5f", key.c_str(), result.metrics[key]["mean"].get<double>());
  }
  say(log, line);
  return result;
}

}  // namespace geopre::training
