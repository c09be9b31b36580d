#pragma once

#include "geopre/geometry/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace geopre::dataio {

inline constexpr std::uint32_t kManifestVersion = 1;

struct ManifestEntry {
  std::string file;  ///< relative to the dataset directory
  bool physics = false;
  std::string prior_tag;
};

struct DatasetManifest {
  std::uint32_t format_version = kManifestVersion;
  std::string kind;  ///< electrostatics | stress_geo
  std::uint64_t seed = 0;
  geometry::Domain domain;
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> test;
  std::string norm_file;  ///< empty when the dataset has no physics
  int k_norm = 100;
  nlohmann::json config = nlohmann::json::object();

  int count(const std::vector<ManifestEntry>& split, bool physics) const;
  int train_physics() const { return count(train, true); }
  int train_geometry() const { return count(train, false); }
  int test_physics() const { return count(test, true); }
  int test_geometry() const { return count(test, false); }
};

nlohmann::json to_json(const DatasetManifest& m);
/// Rejects absolute or parent-escaping paths and unknown format versions.
DatasetManifest manifest_from_json(const nlohmann::json& j);

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& dir);

/// Path of a relative manifest entry; throws on absolute or escaping paths.
std::filesystem::path resolve_relative(const std::filesystem::path& dir, const std::string& rel);

std::string record_file(const std::string& split, std::int64_t index);

}  // namespace geopre::dataio
