#include "geopre/training/ablation.hpp"

#include "geopre/common/container.hpp"
#include "geopre/common/error.hpp"

#include <cctype>
#include <cstdio>
#include <set>

namespace geopre::training {

namespace fs = std::filesystem;

Suite parse_suite(const std::string& s) {
  if (s == "geometry_amount") return Suite::geometry_amount;
  if (s == "kl_weight") return Suite::kl_weight;
  if (s == "proxy_task") return Suite::proxy_task;
  if (s == "latent_size") return Suite::latent_size;
  fail(Errc::config, "unknown ablation suite '" + s + "' (geometry_amount, kl_weight, proxy_task, latent_size)");
}

std::string to_string(Suite s) {
  switch (s) {
    case Suite::geometry_amount: return "geometry_amount";
    case Suite::kl_weight: return "kl_weight";
    case Suite::proxy_task: return "proxy_task";
    case Suite::latent_size: return "latent_size";
  }
  return "?";
}

namespace {

nlohmann::json grid_json(const AblationConfig& c) {
  nlohmann::json g = nlohmann::json::array();
  switch (c.suite) {
    case Suite::geometry_amount:
      for (int k : c.geometry_multipliers) g.push_back(k);
      break;
    case Suite::kl_weight:
      for (const auto& w : c.kl_weights) g.push_back(w ? nlohmann::json(*w) : nlohmann::json());
      break;
    case Suite::proxy_task:
      for (auto p : c.proxies) g.push_back(dataio::to_string(p));
      break;
    case Suite::latent_size:
      for (auto [m, c0] : c.latent_sizes) g.push_back({m, c0});
      break;
  }
  return g;
}

std::string kl_label(const std::optional<double>& w) {
  if (!w) return "AE";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", *w);
  return buf;
}

std::string slug(const std::string& label) {
  std::string s;
  for (char ch : label) s += std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' ? ch : '_';
  return s;
}

struct Column {
  std::string label;
  std::optional<TrainConfig> stage1;  ///< empty: raw point-cloud baseline
};

std::vector<Column> columns(const AblationConfig& cfg, const dataio::Dataset& ds1) {
  std::vector<Column> cols;
  if (cfg.baseline) cols.push_back({"No VAE", std::nullopt});
  switch (cfg.suite) {
    case Suite::geometry_amount: {
      int d = 0;
      for (const auto& r : ds1.train()) d += r.has_physics();
      for (int k : cfg.geometry_multipliers) {
        TrainConfig s = cfg.stage1;
        s.train_records = -1;
        s.geometry_only_records = k * d;
        cols.push_back({"D'=" + std::to_string(k) + "|D|", s});
      }
      break;
    }
    case Suite::kl_weight:
      for (const auto& w : cfg.kl_weights) {
        TrainConfig s = cfg.stage1;
        s.kl_weight = w;
        cols.push_back({kl_label(w), s});
      }
      break;
    case Suite::proxy_task:
      for (auto p : cfg.proxies) {
        TrainConfig s = cfg.stage1;
        s.proxy = p;
        s.vae.out_dim = p == dataio::ProxyTask::sv ? 2 : 1;
        cols.push_back({dataio::to_string(p), s});
      }
      break;
    case Suite::latent_size:
      for (auto [m, c0] : cfg.latent_sizes) {
        TrainConfig s = cfg.stage1;
        s.vae.tokens = m;
        s.vae.latent_dim = c0;
        cols.push_back({std::to_string(m) + "*" + std::to_string(c0), s});
      }
      break;
  }
  return cols;
}

}  // namespace

nlohmann::json to_json(const AblationConfig& c) {
  nlohmann::json seeds = nlohmann::json::array();
  for (auto s : c.seeds) seeds.push_back(s);
  return {{"suite", to_string(c.suite)}, {"stage1", to_json(c.stage1)}, {"stage2", to_json(c.stage2)},
          {"seeds", seeds},              {"baseline", c.baseline},      {"grid", grid_json(c)}};
}

AblationConfig ablation_config(const nlohmann::json& j) {
  static const std::set<std::string> keys = {"suite", "stage1", "stage2", "seeds", "baseline", "grid"};
  require(j.is_object(), Errc::config, "ablation config must be an object");
  for (const auto& [k, v] : j.items()) require(keys.contains(k), Errc::config, "unknown ablation config key '" + k + "'");
  AblationConfig c;
  try {
    c.suite = parse_suite(j.at("suite").get<std::string>());
    nlohmann::json s1 = j.value("stage1", nlohmann::json::object());
    nlohmann::json s2 = j.value("stage2", nlohmann::json::object());
    s1["stage"] = 1;
    s2["stage"] = 2;
    c.stage1 = train_config(s1);
    c.stage2 = train_config(s2);
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    c.baseline = j.value("baseline", c.baseline);
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      require(g.is_array() && !g.empty(), Errc::config, "ablation grid must be a non-empty array");
      switch (c.suite) {
        case Suite::geometry_amount:
          c.geometry_multipliers = g.get<std::vector<int>>();
          for (int k : c.geometry_multipliers) require(k >= 0, Errc::config, "geometry multipliers must be >= 0");
          break;
        case Suite::kl_weight:
          c.kl_weights.clear();
          for (const auto& w : g) c.kl_weights.push_back(w.is_null() ? std::nullopt : std::optional(w.get<double>()));
          break;
        case Suite::proxy_task:
          c.proxies.clear();
          for (const auto& p : g) c.proxies.push_back(dataio::parse_proxy_task(p.get<std::string>()));
          break;
        case Suite::latent_size:
          c.latent_sizes.clear();
          for (const auto& p : g) {
            require(p.is_array() && p.size() == 2, Errc::config, "latent_size grid entries are [tokens, dim]");
            c.latent_sizes.emplace_back(p[0].get<int>(), p[1].get<int>());
          }
          break;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, std::string("ablation config: ") + e.what());
  }
  require(!c.seeds.empty(), Errc::config, "ablation needs at least one seed");
  return c;
}

nlohmann::json to_json(const Table& t) {
  return {{"title", t.title}, {"columns", t.columns}, {"rows", t.rows}, {"row_scale", t.row_scale}, {"cells", t.cells}};
}

Table table_from_json(const nlohmann::json& j) {
  Table t;
  try {
    t.title = j.at("title").get<std::string>();
    t.columns = j.at("columns").get<std::vector<std::string>>();
    t.rows = j.at("rows").get<std::vector<std::string>>();
    t.row_scale = j.at("row_scale").get<std::vector<double>>();
    t.cells = j.at("cells").get<std::vector<std::vector<std::vector<double>>>>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, std::string("table: ") + e.what());
  }
  require(t.row_scale.size() == t.rows.size() && t.cells.size() == t.rows.size(), Errc::config, "table: ragged rows");
  for (const auto& r : t.cells) require(r.size() == t.columns.size(), Errc::config, "table: ragged columns");
  return t;
}

Table run_ablation(const AblationConfig& cfg, const fs::path& out, const LogFn& log) {
  fs::create_directories(out);
  write_text_atomic(out / "ablation_config.json", to_json(cfg).dump(2) + "\n");
  const auto ds1 = dataio::Dataset::open(cfg.stage1.dataset);
  const bool same = cfg.stage2.dataset.empty() || fs::equivalent(cfg.stage1.dataset, cfg.stage2.dataset);
  std::optional<dataio::Dataset> other;
  if (!same) other = dataio::Dataset::open(cfg.stage2.dataset);
  const dataio::Dataset& ds2 = same ? ds1 : *other;
  const auto sum1 = dataio::dataset_checksum(ds1.dir());
  const auto sum2 = same ? sum1 : dataio::dataset_checksum(ds2.dir());

  const auto cols = columns(cfg, ds1);
  Table t;
  t.title = to_string(cfg.suite);
  for (const auto& c : cols) t.columns.push_back(c.label);
  t.rows = {"IOU(%)", "KL"};
  t.row_scale = {100.0, 1.0};
  for (auto m : cfg.stage2.eval_modes) {
    t.rows.push_back("rel_l2 " + dataio::to_string(m) + " (x1e-2)");
    t.row_scale.push_back(100.0);
  }
  t.cells.assign(t.rows.size(), std::vector<std::vector<double>>(cols.size()));

  auto note = [&](const std::string& s) {
    if (log) log(s);
  };
  for (std::size_t ci = 0; ci < cols.size(); ++ci) {
    const auto& col = cols[ci];
    const fs::path dir = out / slug(col.label);
    TrainConfig s2 = cfg.stage2;
    if (col.stage1) {
      const fs::path d1 = dir / "stage1";
      auto r1 = reusable_result(d1, *col.stage1, sum1);
      if (r1) {
        note("[" + col.label + "] reusing stage 1 in " + d1.string());
      } else {
        note("[" + col.label + "] stage 1");
        r1 = pretrain_stage1(*col.stage1, ds1, d1, log);
      }
      if (r1->metrics.contains("iou")) t.cells[0][ci] = {r1->metrics["iou"].get<double>()};
      if (col.stage1->kl_weight) t.cells[1][ci] = {r1->metrics["kl"].get<double>()};
      s2.op.geom = operators::GeomSource::latent;
      s2.encoder = (d1 / r1->checkpoint).string();
    } else {
      s2.op.geom = operators::GeomSource::raw_pc;
      s2.encoder.clear();
    }
    for (auto seed : cfg.seeds) {
      s2.seed = seed;
      const fs::path d2 = dir / ("seed" + std::to_string(seed));
      auto r2 = reusable_result(d2, s2, sum2);
      if (r2) {
        note("[" + col.label + "] reusing stage 2 seed " + std::to_string(seed));
      } else {
        note("[" + col.label + "] stage 2 seed " + std::to_string(seed));
        r2 = train_stage2(s2, ds2, d2, log);
      }
      for (std::size_t mi = 0; mi < cfg.stage2.eval_modes.size(); ++mi)
        t.cells[2 + mi][ci].push_back(r2->metrics[dataio::to_string(cfg.stage2.eval_modes[mi])]["mean"].get<double>());
    }
  }
  write_text_atomic(out / "table.json", to_json(t).dump(2) + "\n");
  return t;
}

}  // namespace geopre::training
