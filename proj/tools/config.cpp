#include "config.hpp"

#include "geopre/common/container.hpp"
#include "geopre/common/error.hpp"

#include <cstdlib>
#include <set>

namespace geopre::cli {

namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& p) {
  const auto bytes = read_file(p);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::config, p.string() + ": " + e.what());
  }
}

// Resolves "extends" recursively; later files override earlier ones.
nlohmann::json resolve(const fs::path& p, std::set<fs::path>& seen) {
  const fs::path canon = fs::weakly_canonical(p);
  require(!seen.contains(canon), Errc::config, "config extends cycle at " + p.string());
  seen.insert(canon);
  nlohmann::json j = read_json(p);
  require(j.is_object(), Errc::config, p.string() + ": config must be a JSON object");
  if (!j.contains("extends")) return j;
  const fs::path base = p.parent_path() / j["extends"].get<std::string>();
  nlohmann::json merged = resolve(base, seen);
  j.erase("extends");
  deep_merge(merged, j);
  return merged;
}

}  // namespace

void deep_merge(nlohmann::json& base, const nlohmann::json& patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (const auto& [k, v] : patch.items()) {
    if (base.contains(k) && base[k].is_object() && v.is_object())
      deep_merge(base[k], v);
    else
      base[k] = v;
  }
}

fs::path find_config(const std::string& name_or_path) {
  if (fs::is_regular_file(name_or_path)) return name_or_path;
  std::vector<fs::path> dirs;
  if (const char* env = std::getenv("GEOPRE_CONFIG_DIR")) dirs.emplace_back(env);
  std::error_code ec;
  const fs::path exe = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) dirs.push_back(exe.parent_path().parent_path() / "share" / "geopre" / "configs");
#ifdef GEOPRE_SOURCE_CONFIG_DIR
  dirs.emplace_back(GEOPRE_SOURCE_CONFIG_DIR);
#endif
  for (const auto& d : dirs) {
    for (const fs::path& cand : {d / name_or_path, d / (name_or_path + ".json")})
      if (fs::is_regular_file(cand)) return cand;
  }
  fail(Errc::config, "config '" + name_or_path + "' not found (set GEOPRE_CONFIG_DIR or pass a file path)");
}

void apply_override(nlohmann::json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, Errc::config, "override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  nlohmann::json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    require(!part.empty(), Errc::config, "override key '" + key + "' has an empty component");
    if (!node->is_object()) *node = nlohmann::json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

LoadedConfig load_config(const std::string& name_or_path, std::string profile, const std::vector<std::string>& overrides) {
  LoadedConfig out;
  out.path = find_config(name_or_path);
  out.name = out.path.stem().string();
  std::set<fs::path> seen;
  out.tree = resolve(out.path, seen);
  if (profile.empty()) profile = out.tree.value("profile", std::string{});
  if (!profile.empty()) {
    const auto& profiles = out.tree.value("profiles", nlohmann::json::object());
    require(profiles.contains(profile), Errc::config, "config has no profile '" + profile + "'");
    deep_merge(out.tree, profiles[profile]);
  }
  out.tree["profile"] = profile;
  out.tree.erase("profiles");
  for (const auto& o : overrides) apply_override(out.tree, o);
  return out;
}

fs::path output_root() {
  const char* env = std::getenv("GEOPRE_OUT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

fs::path under_root(const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : output_root() / path;
}

nlohmann::json section(const LoadedConfig& c, const char* key) {
  require(c.tree.contains(key) && c.tree[key].is_object(), Errc::config,
          c.path.string() + " has no '" + std::string(key) + "' section");
  return c.tree[key];
}

fs::path dataset_path(const std::string& flag, const nlohmann::json& cfg) {
  if (!flag.empty()) return flag;
  const std::string d = cfg.value("dataset", std::string{});
  require(!d.empty(), Errc::config, "no dataset given (config 'dataset' or --dataset)");
  return under_root(d);
}

training::TrainConfig resolve_pretrain(const LoadedConfig& c, const std::string& dataset_flag,
                                       std::optional<std::uint64_t> seed) {
  nlohmann::json j = section(c, "pretrain");
  j["stage"] = 1;
  if (seed) j["seed"] = *seed;
  j["dataset"] = dataset_path(dataset_flag, j).string();
  return training::train_config(j);
}

training::TrainConfig resolve_train(const LoadedConfig& c, const std::string& dataset_flag,
                                    std::optional<std::uint64_t> seed, const std::string& backbone,
                                    const std::string& geom, const std::string& encoder) {
  nlohmann::json j = section(c, "train");
  j["stage"] = 2;
  if (seed) j["seed"] = *seed;
  if (!j.contains("operator")) j["operator"] = nlohmann::json::object();
  if (!backbone.empty()) j["operator"]["backbone"] = backbone;
  if (!geom.empty()) j["operator"]["geom"] = geom;
  j["dataset"] = dataset_path(dataset_flag, j).string();
  const bool latent = operators::parse_geom_source(j["operator"].value("geom", std::string("raw"))) ==
                      operators::GeomSource::latent;
  if (!encoder.empty())
    j["encoder"] = encoder;
  else if (latent && !j.value("encoder", std::string{}).empty())
    j["encoder"] = under_root(j["encoder"].get<std::string>()).string();
  if (!latent) j["encoder"] = "";
  return training::train_config(j);
}

fs::path pretrain_dir(const LoadedConfig& c, const training::TrainConfig& cfg) {
  return output_root() / "pretrain" / (c.name + "_s" + std::to_string(cfg.seed));
}

fs::path train_dir(const LoadedConfig& c, const training::TrainConfig& cfg) {
  const std::string tag = operators::to_string(cfg.op.backbone) + "_" + operators::to_string(cfg.op.geom);
  return output_root() / "train" / (c.name + "_" + tag + "_s" + std::to_string(cfg.seed));
}

}  // namespace geopre::cli
