#pragma once

#include "geopre/dataio/manifest.hpp"
#include "geopre/dataio/record.hpp"
#include "geopre/solver/poisson.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace geopre::dataio {

/// Per-record point stocks shared by both dataset kinds.
struct StockConfig {
  int mesh_points = 2048;
  double boundary_fraction = 0.5;
  int occ_rand = 4096;
  int occ_perturbed = 2048;
  double perturb_sigma = 0.02;
  bool distance = false;  ///< also store SDF/SV at the occupancy points
  std::string mesh_covers = "object";  ///< object | domain
};

struct ElectrostaticsConfig {
  std::uint64_t seed = 0;
  int train_count = 2000;
  int train_physics = 400;
  int test_physics = 100;
  int test_geometry = 100;
  int grid = 257;
  int physics_queries = 8192;
  double interface_perturbation = 0.2;
  solver::MaterialValues materials;
  StockConfig stock;
  int k_norm = 100;
  int max_retries = 5;
  int threads = 0;  ///< 0 = hardware concurrency
};

struct VoidRow {
  std::string prior;  ///< e.g. "ellipse_a0.3_b0.15"
  int train = 1900;
  int test = 125;
};

struct StressGeoConfig {
  std::uint64_t seed = 0;
  std::vector<VoidRow> rows;
  double grf_amplitude = 0.05;
  double grf_corr_length = 0.6;
  int n_theta = 512;
  StockConfig stock;
  int max_retries = 5;
  int threads = 0;
};

ElectrostaticsConfig electrostatics_config(const nlohmann::json& j);
StressGeoConfig stress_geo_config(const nlohmann::json& j);

/// Progress/diagnostic sink; called from worker threads under a lock.
using LogFn = std::function<void(const std::string&)>;

DatasetManifest build_electrostatics_dataset(const std::filesystem::path& dir, const ElectrostaticsConfig& cfg,
                                             const LogFn& log = {});
DatasetManifest build_stress_geometry_dataset(const std::filesystem::path& dir, const StressGeoConfig& cfg,
                                              const LogFn& log = {});

/// Record layout of the electrostatics train split: interface type (1 or 2)
/// and whether the record carries physics.
struct RecordPlan {
  int type = 1;
  bool physics = false;
};
std::vector<RecordPlan> electrostatics_train_plan(int count, int physics);

/// Solved potential grid for a record's geometry (used by generation and by
/// regeneration checks).
solver::GridField solve_for_geometry(const geometry::GeometryInstance& g, int grid,
                                     const solver::MaterialValues& materials);

/// Builds the geometry-derived parts of a record (mesh and proxy stocks).
SampleRecord make_geometry_record(const geometry::GeometryInstance& g, const StockConfig& stock,
                                  std::uint64_t record_seed);

}  // namespace geopre::dataio
