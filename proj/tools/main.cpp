// geopre: dataset generation, two-stage training, evaluation, ablations and
// reports from JSON configs.

#include "config.hpp"
#include "plot.hpp"

#include "geopre/common/container.hpp"
#include "geopre/common/error.hpp"
#include "geopre/dataio/builders.hpp"
#include "geopre/dataio/dataset.hpp"
#include "geopre/nn/checkpoint.hpp"
#include "geopre/training/ablation.hpp"
#include "geopre/training/evaluate.hpp"
#include "geopre/training/report.hpp"
#include "geopre/training/train.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;

namespace geopre::cli {
namespace {

void log_line(const std::string& s) { std::cerr << "[geopre] " << s << std::endl; }

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

void prepare_out(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    require(fs::is_directory(dir), Errc::config, dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      require(force, Errc::config, "output directory " + dir.string() + " is not empty (pass --force to replace it)");
      for (const auto& e : fs::directory_iterator(dir)) fs::remove_all(e.path());
    }
  }
  fs::create_directories(dir);
}

void write_json(const fs::path& p, const json& j) { write_text_atomic(p, j.dump(2) + "\n"); }

json read_json_file(const fs::path& p) {
  const auto bytes = read_file(p);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    fail(Errc::config, p.string() + ": " + e.what());
  }
}

// Shared flags of the config-driven commands.
struct Common {
  std::string config;
  std::string profile;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;

  void add(CLI::App* app, bool with_seed = true) {
    app->add_option("-c,--config", config, "config name or path (see configs/)")->required();
    app->add_option("--profile", profile, "profile overlay from the config's 'profiles' (e.g. desk)");
    app->add_option("--set", sets, "dotted override key=value, repeatable (e.g. --set pretrain.epochs=5)");
    if (with_seed) app->add_option("--seed", seed, "seed override");
    app->add_option("-o,--out", out, "output directory (default under $GEOPRE_OUT)");
    app->add_flag("--force", force, "replace a non-empty output directory");
  }
  LoadedConfig load() const { return load_config(config, profile, sets); }
};

void echo(const fs::path& out, const std::string& command, const LoadedConfig& c, const json& resolved) {
  write_json(out / "resolved_config.json",
             {{"command", command}, {"config_file", c.path.string()}, {"profile", c.tree.value("profile", "")},
              {"resolved", resolved}});
}

int cmd_gen_data(const Common& o) {
  const LoadedConfig c = o.load();
  json data = section(c, "data");
  if (o.seed) data["seed"] = *o.seed;
  const std::string kind = data.value("kind", std::string{});
  data.erase("kind");
  const fs::path out = o.out.empty() ? output_root() / "data" / c.name : fs::path(o.out);
  prepare_out(out, o.force);
  dataio::DatasetManifest m;
  if (kind == "electrostatics") {
    m = dataio::build_electrostatics_dataset(out, dataio::electrostatics_config(data), log_line);
  } else if (kind == "stress_geo") {
    m = dataio::build_stress_geometry_dataset(out, dataio::stress_geo_config(data), log_line);
  } else {
    fail(Errc::config, "data.kind must be electrostatics or stress_geo, got '" + kind + "'");
  }
  data["kind"] = kind;
  echo(out, "gen-data", c, data);
  long train_physics = 0, test_physics = 0;
  for (const auto& e : m.train) train_physics += e.physics;
  for (const auto& e : m.test) test_physics += e.physics;
  const json summary = {{"dataset", out.string()},
                        {"kind", kind},
                        {"seed", m.seed},
                        {"train", m.train.size()},
                        {"train_physics", train_physics},
                        {"test", m.test.size()},
                        {"test_physics", test_physics},
                        {"checksum", hex(dataio::dataset_checksum(out))}};
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

int cmd_pretrain(const Common& o, const std::string& dataset) {
  const LoadedConfig c = o.load();
  const training::TrainConfig cfg = resolve_pretrain(c, dataset, o.seed);
  const fs::path out = o.out.empty() ? pretrain_dir(c, cfg) : fs::path(o.out);
  prepare_out(out, o.force);
  echo(out, "pretrain", c, training::to_json(cfg));
  const auto ds = dataio::Dataset::open(cfg.dataset);
  const auto r = training::pretrain_stage1(cfg, ds, out, log_line);
  std::cout << json{{"run", out.string()}, {"metrics", r.metrics}}.dump(2) << std::endl;
  return 0;
}

int cmd_train(const Common& o, const std::string& dataset, const std::string& backbone, const std::string& geom,
              const std::string& encoder) {
  const LoadedConfig c = o.load();
  const training::TrainConfig cfg = resolve_train(c, dataset, o.seed, backbone, geom, encoder);
  const fs::path out = o.out.empty() ? train_dir(c, cfg) : fs::path(o.out);
  prepare_out(out, o.force);
  echo(out, "train", c, training::to_json(cfg));
  const auto ds = dataio::Dataset::open(cfg.dataset);
  const auto r = training::train_stage2(cfg, ds, out, log_line);
  json metrics = r.metrics;
  for (auto& [k, v] : metrics.items()) v.erase("per_sample");
  std::cout << json{{"run", out.string()}, {"rel_l2", metrics}}.dump(2) << std::endl;
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset, const std::vector<std::string>& modes,
             const std::string& out) {
  const auto info = nn::read_checkpoint_info(checkpoint);
  const std::string ds_dir = dataset.empty() ? info.config.value("dataset", std::string{}) : dataset;
  require(!ds_dir.empty(), Errc::config, "no dataset given and none stored in the checkpoint");
  const auto ds = dataio::Dataset::open(ds_dir);
  std::vector<dataio::QueryMode> qm;
  for (const auto& m : modes) qm.push_back(dataio::parse_query_mode(m));
  json result = training::evaluate_checkpoint(checkpoint, ds, qm);
  result["checkpoint"] = checkpoint;
  result["dataset_checksum"] = hex(dataio::dataset_checksum(ds.dir()));
  const fs::path dest = out.empty() ? fs::path(checkpoint).parent_path() / "eval.json" : fs::path(out);
  write_json(dest, result);
  std::cout << result.dump(2) << std::endl;
  return 0;
}

void table_outputs(const fs::path& out, const std::string& stem, const training::Table& t) {
  write_text_atomic(out / (stem + ".txt"), training::format_table(t));
  write_text_atomic(out / (stem + ".csv"), training::table_csv(t));
  write_json(out / (stem + ".json"), training::to_json(t));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::vector<Bar> bars;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (t.cells[r][c].empty()) continue;
      const auto ms = training::mean_std(t.cells[r][c]);
      bars.push_back({t.columns[c], ms.mean * t.row_scale[r], ms.std * t.row_scale[r]});
    }
    if (bars.empty()) continue;
    std::string name;
    for (char ch : t.rows[r]) name += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
    bar_plot(out / (stem + "_" + name + ".png"), t.rows[r], bars);
  }
}

int cmd_ablate(const Common& o, const std::string& suite, const std::string& dataset) {
  const LoadedConfig c = o.load();
  const json ab = c.tree.value("ablate", json::object());
  json s1 = section(c, "pretrain");
  json s2 = section(c, "train");
  deep_merge(s1, ab.value("stage1", json::object()));
  deep_merge(s2, ab.value("stage2", json::object()));
  s1["dataset"] = dataset_path(dataset, s1).string();
  s2["dataset"] = dataset.empty() && s2.contains("dataset") ? dataset_path("", s2).string() : s1["dataset"].get<std::string>();
  s2["encoder"] = "";
  if (o.seed) s1["seed"] = *o.seed;
  json aj = {{"suite", suite}, {"stage1", s1}, {"stage2", s2}};
  if (ab.contains("seeds")) aj["seeds"] = ab["seeds"];
  if (ab.contains("baseline")) aj["baseline"] = ab["baseline"];
  if (ab.contains("grids") && ab["grids"].contains(suite)) aj["grid"] = ab["grids"][suite];
  const training::AblationConfig cfg = training::ablation_config(aj);
  const fs::path out = o.out.empty() ? output_root() / "ablate" / (c.name + "_" + suite) : fs::path(o.out);
  if (o.force) prepare_out(out, true);
  fs::create_directories(out);  // existing runs inside are reused when their config matches
  echo(out, "ablate", c, training::to_json(cfg));
  const auto t = training::run_ablation(cfg, out, log_line);
  table_outputs(out, "table", t);
  std::cout << training::format_table(t);
  return 0;
}

// Truth, prediction and error on the first physics test record.
void field_figure(const fs::path& run, const training::RunResult& r, const std::string& dataset_flag,
                  std::map<std::string, std::shared_ptr<dataio::Dataset>>& cache, const fs::path& dest) {
  const auto cfg = training::train_config(r.config);
  const std::string dir = dataset_flag.empty() ? cfg.dataset : dataset_flag;
  if (!fs::exists(dir)) {
    log_line("dataset " + dir + " not found; skipping field figure for " + run.string());
    return;
  }
  auto& ds = cache[dir];
  if (!ds) ds = std::make_shared<dataio::Dataset>(dataio::Dataset::open(dir));
  const auto info = nn::read_checkpoint_info(run / r.checkpoint);
  const auto full = training::train_config(info.config);
  nn::ParameterSet<float> params;
  operators::NeuralOperator<float> op(full.op, params, 0);
  nn::load_checkpoint(run / r.checkpoint, params);
  training::GeometryInput geom;
  if (full.op.geom == operators::GeomSource::latent) geom = training::GeometryInput(run / "encoder.ckpt");
  const auto test = training::physics_records(ds->test());
  require(!test.empty(), Errc::config, "dataset has no physics test records");
  const auto s = dataio::make_eval_sample(test.front(), dataio::QueryMode::random, &*ds->norm());
  nn::Tape<float> t(false);
  const Eigen::VectorXd pred = op.forward(t, geom(test.front()), s.queries).value().col(0).cast<double>();
  const Eigen::VectorXd truth = s.targets.col(0).cast<double>();
  const Eigen::MatrixX2d pts = s.queries.leftCols(2).cast<double>();
  field_plot(dest, {{"truth", pts, truth}, {"prediction", pts, pred}, {"abs error", pts, (pred - truth).cwiseAbs()}}, 2);
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out_flag, const std::string& dataset) {
  const fs::path out = out_flag.empty() ? output_root() / "report" : fs::path(out_flag);
  fs::create_directories(out);
  std::vector<training::RunResult> stage1, stage2;
  std::vector<fs::path> dirs2;
  std::vector<std::string> labels1, labels2;
  for (const auto& d : runs) {
    const fs::path dir(d);
    if (fs::exists(dir / "table.json")) {
      const auto t = training::table_from_json(read_json_file(dir / "table.json"));
      table_outputs(out, "ablation_" + t.title, t);
      std::cout << training::format_table(t) << "\n";
      continue;
    }
    require(fs::exists(dir / "result.json"), Errc::config, d + " has neither result.json nor table.json");
    auto r = training::read_run_result(dir / "result.json");
    if (r.stage == 1) {
      stage1.push_back(std::move(r));
      labels1.push_back(dir.filename().string());
    } else {
      stage2.push_back(std::move(r));
      dirs2.push_back(dir);
      labels2.push_back(dir.filename().string());
    }
  }
  auto curves = [&](const std::vector<training::RunResult>& rs, const std::vector<std::string>& labels,
                    const std::string& name, const std::string& title) {
    if (rs.empty()) return;
    std::vector<Series> series;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      Series s{labels[i], {}, {}};
      for (const auto& e : rs[i].curve) {
        s.x.push_back(e.epoch + 1);
        s.y.push_back(e.loss);
      }
      series.push_back(std::move(s));
    }
    line_plot(out / name, title, "epoch", series, true);
  };
  curves(stage1, labels1, "loss_stage1.png", "stage 1 training loss");
  curves(stage2, labels2, "loss_stage2.png", "stage 2 train rel_l2");
  json summary = {{"report", out.string()}};
  if (!stage1.empty()) {
    json s1 = json::array();
    for (std::size_t i = 0; i < stage1.size(); ++i) s1.push_back({{"run", labels1[i]}, {"metrics", stage1[i].metrics}});
    summary["stage1"] = s1;
  }
  if (!stage2.empty()) {
    const auto t = training::stage2_table(stage2);
    table_outputs(out, "stage2", t);
    std::cout << training::format_table(t);
    std::map<std::string, std::shared_ptr<dataio::Dataset>> cache;
    std::map<std::string, bool> drawn;
    for (std::size_t i = 0; i < stage2.size(); ++i) {
      const auto cfg = training::train_config(stage2[i].config);
      const std::string key = operators::to_string(cfg.op.backbone) + "_" + operators::to_string(cfg.op.geom);
      if (drawn[key]) continue;
      drawn[key] = true;
      field_figure(dirs2[i], stage2[i], dataset, cache, out / ("field_" + key + ".png"));
    }
    summary["stage2_table"] = training::to_json(t);
  }
  write_json(out / "summary.json", summary);
  return 0;
}

int exit_code(Errc e) {
  switch (e) {
    case Errc::config:
    case Errc::invalid_argument:
      return 2;
    default:
      return 3;
  }
}

void error_json(const std::string& code, const std::string& message) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << std::endl;
}

}  // namespace
}  // namespace geopre::cli

int main(int argc, char** argv) {
  using namespace geopre::cli;
  CLI::App app{"geopre: physics-agnostic geometry pretraining for neural operators"};
  app.require_subcommand(1);

  Common gen, pre, trn, abl;
  std::string pre_dataset, trn_dataset, abl_dataset, backbone, geom, encoder, suite;
  std::string ev_ckpt, ev_dataset, ev_out, rep_out, rep_dataset;
  std::vector<std::string> ev_modes, rep_runs;

  auto* g = app.add_subcommand("gen-data", "generate a dataset directory");
  gen.add(g);
  auto* p = app.add_subcommand("pretrain", "stage 1: train the point-cloud VAE on proxy fields");
  pre.add(p);
  p->add_option("--dataset", pre_dataset, "dataset directory (default: config, under $GEOPRE_OUT)");
  auto* t = app.add_subcommand("train", "stage 2: train a neural operator");
  trn.add(t);
  t->add_option("--dataset", trn_dataset, "dataset directory (default: config, under $GEOPRE_OUT)");
  t->add_option("--backbone", backbone, "gnot | transolver | lno")->check(CLI::IsMember({"gnot", "transolver", "lno"}));
  t->add_option("--geom", geom, "raw | latent")->check(CLI::IsMember({"raw", "raw_pc", "latent"}));
  t->add_option("--encoder", encoder, "stage-1 checkpoint for --geom latent");
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  e->add_option("--checkpoint", ev_ckpt, "model.ckpt from pretrain or train")->required()->check(CLI::ExistingFile);
  e->add_option("--dataset", ev_dataset, "dataset directory (default: the one stored in the checkpoint)");
  e->add_option("--modes", ev_modes, "query modes for operators: mesh random")->delimiter(',');
  e->add_option("-o,--out", ev_out, "metrics file (default: eval.json next to the checkpoint)");
  auto* a = app.add_subcommand("ablate", "run an ablation suite");
  abl.add(a);
  a->add_option("--suite", suite, "geometry_amount | kl_weight | proxy_task | latent_size")
      ->required()
      ->check(CLI::IsMember({"geometry_amount", "kl_weight", "proxy_task", "latent_size"}));
  a->add_option("--dataset", abl_dataset, "dataset directory (default: config, under $GEOPRE_OUT)");
  auto* r = app.add_subcommand("report", "tables and plots from finished runs");
  r->add_option("runs", rep_runs, "run directories (result.json) or ablation directories (table.json)")
      ->required()
      ->check(CLI::ExistingDirectory);
  r->add_option("-o,--out", rep_out, "report directory (default: $GEOPRE_OUT/report)");
  r->add_option("--dataset", rep_dataset, "dataset for field figures (default: the one in each run's config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    error_json("usage", ex.what());
    return 2;
  }

  try {
    if (*g) return cmd_gen_data(gen);
    if (*p) return cmd_pretrain(pre, pre_dataset);
    if (*t) return cmd_train(trn, trn_dataset, backbone, geom, encoder);
    if (*e) return cmd_eval(ev_ckpt, ev_dataset, ev_modes, ev_out);
    if (*a) return cmd_ablate(abl, suite, abl_dataset);
    if (*r) return cmd_report(rep_runs, rep_out, rep_dataset);
  } catch (const geopre::Error& ex) {
    error_json(std::string(geopre::to_string(ex.code())), ex.what());
    return exit_code(ex.code());
  } catch (const nlohmann::json::exception& ex) {
    error_json("config", ex.what());
    return 2;
  } catch (const std::exception& ex) {
    error_json("runtime", ex.what());
    return 3;
  }
  return 2;
}
