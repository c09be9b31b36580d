#include <doctest.h>

#include "geopre/common/error.hpp"
#include "geopre/dataio/builders.hpp"
#include "geopre/training/evaluate.hpp"
#include "geopre/training/report.hpp"
#include "geopre/training/train.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>

using namespace geopre;
using namespace geopre::training;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("geopre_train_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

/// Small dataset shared by all cases; built once per process.
const dataio::Dataset& tiny_dataset() {
  static const dataio::Dataset ds = [] {
    dataio::ElectrostaticsConfig c;
    c.seed = 11;
    c.train_count = 8;
    c.train_physics = 3;
    c.test_physics = 2;
    c.test_geometry = 1;
    c.grid = 33;
    c.physics_queries = 128;
    c.stock.mesh_points = 96;
    c.stock.occ_rand = 128;
    c.stock.occ_perturbed = 64;
    c.k_norm = 3;
    c.threads = 1;
    const auto dir = scratch("data");
    dataio::build_electrostatics_dataset(dir, c);
    return dataio::Dataset::open(dir);
  }();
  return ds;
}

json stage1_json() {
  return {{"stage", 1},
          {"epochs", 2},
          {"batch_size", 4},
          {"seed", 3},
          {"counts", {{"geom", 64}, {"occ_rand", 32}, {"occ_perturbed", 32}}},
          {"vae", {{"width", 16}, {"latent_dim", 4}, {"tokens", 4}, {"depth", 1}, {"heads", 2}, {"frequencies", 2}}}};
}

json stage2_json(const std::string& backbone, const std::string& geom, const fs::path& encoder = {}) {
  json j = {{"stage", 2},
            {"epochs", 2},
            {"batch_size", 2},
            {"seed", 4},
            {"counts", {{"geom", 64}, {"physics", 64}}},
            {"operator", {{"backbone", backbone}, {"geom", geom}, {"hidden", 8}, {"heads", 2}, {"layers", 1},
                          {"slices", 3}, {"lno_tokens", 3}, {"ff_mult", 2}}}};
  if (!encoder.empty()) j["encoder"] = encoder.string();
  return j;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::invalid_argument;
}

}  // namespace

TEST_CASE("train config defaults and validation") {
  CHECK(train_config(json{{"stage", 1}}).epochs == 400);
  CHECK(train_config(json{{"stage", 2}}).epochs == 200);
  const auto desk = train_config(json{{"stage", 1}, {"desk_profile", true}});
  CHECK(desk.vae.width == 128);
  CHECK(desk.vae.tokens == 64);
  CHECK(desk.vae.latent_dim == 16);

  CHECK(code_of([] { train_config(json{{"stage", 1}, {"epoch", 3}}); }) == Errc::config);
  CHECK(code_of([] { train_config(json{{"stage", 3}}); }) == Errc::config);
  CHECK(code_of([] { train_config(json{{"batch_size", 0}}); }) == Errc::config);

  const auto ae = train_config(json{{"kl_weight", nullptr}});
  CHECK_FALSE(ae.kl_weight.has_value());

  const auto cfg = train_config(stage2_json("lno", "latent", "enc.ckpt"));
  CHECK(to_json(train_config(to_json(cfg))) == to_json(cfg));
}

TEST_CASE("format cell") {
  const std::vector<double> two = {0.046, 0.042};
  CHECK(format_cell(two) == "4.40(0.28)");
  const std::vector<double> one = {0.034};
  CHECK(format_cell(one) == "3.40");
  CHECK(format_cell(std::vector<double>{}) == "-");
  const auto m = mean_std(two);
  CHECK(m.mean == doctest::Approx(0.044));
  CHECK(m.std == doctest::Approx(0.0028284271));
}

TEST_CASE("stage 1 run: checkpoint, evaluation and determinism") {
  const auto& ds = tiny_dataset();
  const auto cfg = train_config(stage1_json());
  const auto a = scratch("s1a");
  const auto b = scratch("s1b");
  const RunResult ra = pretrain_stage1(cfg, ds, a);
  const RunResult rb = pretrain_stage1(cfg, ds, b);

  REQUIRE(ra.curve.size() == 2);
  CHECK(ra.curve[0].kl.has_value());
  CHECK(std::isfinite(ra.curve[1].loss));
  CHECK(slurp(a / "model.ckpt") == slurp(b / "model.ckpt"));
  CHECK(ra.metrics.dump() == rb.metrics.dump());

  // Reloading the checkpoint reproduces the stored metrics.
  const json ev = evaluate_checkpoint(a / "model.ckpt", ds);
  CHECK(ev["kind"] == "vae");
  CHECK(ev["metrics"].dump() == ra.metrics.dump());

  const RunResult back = read_run_result(a / "result.json");
  CHECK(to_json(back).dump() == to_json(ra).dump());

  CHECK(reusable_result(a, cfg, dataio::dataset_checksum(ds.dir())).has_value());
  auto changed = cfg;
  changed.epochs = 3;
  CHECK_FALSE(reusable_result(a, changed, dataio::dataset_checksum(ds.dir())).has_value());
  CHECK_FALSE(reusable_result(a, cfg, dataio::dataset_checksum(ds.dir()) + 1).has_value());
}

TEST_CASE("stage 2 runs keep the encoder frozen") {
  const auto& ds = tiny_dataset();
  const auto enc_dir = scratch("enc");
  pretrain_stage1(train_config(stage1_json()), ds, enc_dir);

  for (const std::string bb : {"gnot", "transolver", "lno"}) {
    CAPTURE(bb);
    const auto out = scratch("s2_" + bb);
    const auto cfg = train_config(stage2_json(bb, "latent", enc_dir / "model.ckpt"));
    const RunResult r = train_stage2(cfg, ds, out);
    CHECK(slurp(out / "encoder.ckpt") == slurp(enc_dir / "model.ckpt"));
    REQUIRE(r.encoder_digest.has_value());
    CHECK(*r.encoder_digest == GeometryInput(enc_dir / "model.ckpt").encoder_digest());
    CHECK(r.metrics.contains("mesh"));
    CHECK(r.metrics.contains("random"));
    CHECK(r.metrics["random"]["per_sample"].size() == 2);

    const json ev = evaluate_checkpoint(out / "model.ckpt", ds);
    CHECK(ev["kind"] == "operator");
    CHECK(ev["metrics"].dump() == r.metrics.dump());
  }
}

TEST_CASE("stage 2 raw input and report table") {
  const auto& ds = tiny_dataset();
  const auto out = scratch("s2_raw");
  const RunResult r = train_stage2(train_config(stage2_json("gnot", "raw")), ds, out);
  CHECK_FALSE(r.encoder_digest.has_value());
  CHECK_FALSE(fs::exists(out / "encoder.ckpt"));

  std::vector<RunResult> runs = {r, r};
  const Table t = stage2_table(runs);
  REQUIRE(t.columns.size() == 1);
  CHECK(t.columns[0] == "GNOT");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.cells[0][0].size() == 2);

  runs[1].dataset_checksum ^= 1u;
  CHECK(code_of([&] { stage2_table(runs); }) == Errc::mismatch);
}

TEST_CASE("stage 2 rejects a missing encoder") {
  const auto& ds = tiny_dataset();
  auto cfg = train_config(stage2_json("gnot", "latent", scratch("none") / "model.ckpt"));
  CHECK_THROWS_AS(train_stage2(cfg, ds, scratch("s2_missing")), Error);
}

TEST_CASE("operator loss drops on a tiny train set") {
  const auto& ds = tiny_dataset();
  json j = stage2_json("gnot", "raw");
  j["epochs"] = 150;
  j["batch_size"] = 1;
  j["lr_max"] = 3e-3;
  j["lr_min"] = 1e-4;
  j["weight_decay"] = 0.0;
  j["operator"]["hidden"] = 16;
  const auto cfg = train_config(j);
  const RunResult r = train_stage2(cfg, ds, scratch("s2_fit"));
  // Train loss falls well below the zero-prediction level of 1.
  CHECK(r.curve.back().loss < 0.5 * r.curve.front().loss);
  CHECK(r.curve.back().loss < 0.5);
}
