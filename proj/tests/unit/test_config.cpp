#include <doctest.h>

#include "config.hpp"

#include "geopre/common/error.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace geopre;
using namespace geopre::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path config_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "geopre_test_configs";
    fs::remove_all(d);
    fs::create_directories(d / "sub");
    auto write = [&](const fs::path& p, const json& j) { std::ofstream(d / p) << j.dump(); };
    write("base.json", {{"data", {{"seed", 0}, {"grid", 257}, {"stock", {{"mesh_points", 2048}}}}},
                        {"pretrain", {{"epochs", 400}, {"kl_weight", 0.001}, {"dataset", "data/base"}}},
                        {"profiles", {{"desk", {{"data", {{"grid", 129}}}, {"pretrain", {{"epochs", 100}}}}}}}});
    write("sub/child.json", {{"extends", "../base.json"}, {"profile", "desk"}, {"pretrain", {{"kl_weight", nullptr}}}});
    write("loop_a.json", {{"extends", "loop_b.json"}});
    write("loop_b.json", {{"extends", "loop_a.json"}});
    return d;
  }();
  return dir;
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

TEST_CASE("extends, profile and null override") {
  const auto c = load_config((config_dir() / "sub" / "child.json").string(), "", {});
  CHECK(c.name == "child");
  CHECK(c.tree["profile"] == "desk");
  CHECK_FALSE(c.tree.contains("profiles"));
  CHECK(c.tree["data"]["grid"] == 129);
  CHECK(c.tree["data"]["stock"]["mesh_points"] == 2048);
  CHECK(c.tree["pretrain"]["epochs"] == 100);
  CHECK(c.tree["pretrain"].contains("kl_weight"));
  CHECK(c.tree["pretrain"]["kl_weight"].is_null());

  const auto plain = load_config((config_dir() / "base.json").string(), "", {});
  CHECK(plain.tree["data"]["grid"] == 257);
  const auto desk = load_config((config_dir() / "base.json").string(), "desk", {});
  CHECK(desk.tree["data"]["grid"] == 129);
  CHECK(code_of([] { load_config((config_dir() / "base.json").string(), "laptop", {}); }) == Errc::config);
}

TEST_CASE("dotted overrides") {
  const auto c = load_config((config_dir() / "base.json").string(), "",
                             {"data.grid=65", "pretrain.proxy=sdf", "data.stock.distance=true", "new.key=[1,2]"});
  CHECK(c.tree["data"]["grid"] == 65);
  CHECK(c.tree["pretrain"]["proxy"] == "sdf");
  CHECK(c.tree["data"]["stock"]["distance"] == true);
  CHECK(c.tree["data"]["stock"]["mesh_points"] == 2048);
  CHECK(c.tree["new"]["key"] == json::array({1, 2}));
  CHECK(code_of([] { load_config((config_dir() / "base.json").string(), "", {"grid"}); }) == Errc::config);
  CHECK(code_of([] { load_config((config_dir() / "base.json").string(), "", {"data..grid=1"}); }) == Errc::config);
}

TEST_CASE("config lookup errors") {
  CHECK(code_of([] { load_config((config_dir() / "loop_a.json").string(), "", {}); }) == Errc::config);
  CHECK(code_of([] { load_config("no_such_config_anywhere", "", {}); }) == Errc::config);
  ::setenv("GEOPRE_CONFIG_DIR", config_dir().c_str(), 1);
  CHECK(load_config("base", "", {}).path == config_dir() / "base.json");
  ::unsetenv("GEOPRE_CONFIG_DIR");
}

TEST_CASE("stage settings resolve dataset paths under the output root") {
  ::setenv("GEOPRE_OUT", "/tmp/geopre_out_root", 1);
  const auto c = load_config((config_dir() / "sub" / "child.json").string(), "", {});
  const auto cfg = resolve_pretrain(c, "", 5);
  CHECK(cfg.dataset == "/tmp/geopre_out_root/data/base");
  CHECK(cfg.epochs == 100);
  CHECK(cfg.seed == 5);
  CHECK_FALSE(cfg.kl_weight.has_value());
  CHECK(pretrain_dir(c, cfg) == fs::path("/tmp/geopre_out_root/pretrain/child_s5"));
  CHECK(resolve_pretrain(c, "/elsewhere", std::nullopt).dataset == "/elsewhere");
  ::unsetenv("GEOPRE_OUT");
  CHECK(output_root() == fs::path("runs"));
}

TEST_CASE("shipped configs resolve") {
  for (const char* name : {"electrostatics", "electro_desk", "stress_geo", "stress_desk"}) {
    CAPTURE(name);
    const auto c = load_config(name, "", {});
    CHECK(c.tree.contains("data"));
  }
  const auto desk = load_config("electro_desk", "", {});
  CHECK(desk.tree["data"]["train_count"] == 2000);
  const auto pre = resolve_pretrain(desk, "", std::nullopt);
  CHECK(pre.vae.width == 128);
  CHECK(pre.vae.tokens == 64);
  CHECK(pre.vae.latent_dim == 16);
  const auto raw = resolve_train(desk, "", std::nullopt, "gnot", "raw", "");
  CHECK(raw.encoder.empty());
  const auto lat = resolve_train(desk, "", std::nullopt, "transolver", "latent", "");
  CHECK(lat.op.backbone == operators::Backbone::transolver);
  CHECK(fs::path(lat.encoder).filename() == "model.ckpt");
}
