#pragma once

#include "geopre/training/train.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace geopre::cli {

struct LoadedConfig {
  nlohmann::json tree;        ///< fully resolved: extends merged, profile applied, overrides set
  std::string name;           ///< stem of the top-level config file
  std::filesystem::path path;
};

/// Finds a config by path or by name in the config search path:
/// $GEOPRE_CONFIG_DIR, <exe>/../share/geopre/configs, the source tree.
std::filesystem::path find_config(const std::string& name_or_path);

/// Loads a config file, merging "extends" chains (paths relative to the
/// including file), then the "profiles.<profile>" overlay, then dotted
/// `key=value` overrides. An empty profile uses the file's "profile" key.
LoadedConfig load_config(const std::string& name_or_path, std::string profile,
                         const std::vector<std::string>& overrides);

/// Recursive object merge where `patch` wins. Unlike merge_patch, null
/// replaces instead of deleting (kl_weight: null means a deterministic
/// autoencoder).
void deep_merge(nlohmann::json& base, const nlohmann::json& patch);

/// Sets `a.b.c` to the value parsed as JSON, or to the raw string if it
/// does not parse.
void apply_override(nlohmann::json& tree, const std::string& assignment);

/// Output root: $GEOPRE_OUT, else "runs".
std::filesystem::path output_root();

/// Relative paths inside configs are addressed from the output root.
std::filesystem::path under_root(const std::string& p);

/// The named top-level object of a config; throws config if missing.
nlohmann::json section(const LoadedConfig& c, const char* key);

/// `flag` if given, else the section's "dataset" under the output root.
std::filesystem::path dataset_path(const std::string& flag, const nlohmann::json& section);

/// Stage-1 settings from the "pretrain" section. A non-empty
/// `dataset_flag` replaces the configured dataset.
training::TrainConfig resolve_pretrain(const LoadedConfig& c, const std::string& dataset_flag,
                                       std::optional<std::uint64_t> seed);

/// Stage-2 settings from the "train" section. Empty strings keep the
/// configured values; raw-input runs drop the encoder.
training::TrainConfig resolve_train(const LoadedConfig& c, const std::string& dataset_flag,
                                    std::optional<std::uint64_t> seed, const std::string& backbone,
                                    const std::string& geom, const std::string& encoder);

/// Default run directories under the output root.
std::filesystem::path pretrain_dir(const LoadedConfig& c, const training::TrainConfig& cfg);
std::filesystem::path train_dir(const LoadedConfig& c, const training::TrainConfig& cfg);

}  // namespace geopre::cli
