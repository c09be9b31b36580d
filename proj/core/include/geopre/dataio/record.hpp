#pragma once

#include "geopre/common/container.hpp"
#include "geopre/geometry/types.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace geopre::dataio {

/// float32 row-major array; point sets are n x 2.
using FMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Bits = std::vector<std::uint8_t>;

inline constexpr Magic kRecordMagic = {'G', 'P', 'R', 'E', 'C', '0', '0', '1'};
inline constexpr std::uint32_t kRecordVersion = 1;

struct OccupancySamples {
  FMatrix points;  ///< n x 2
  Bits values;
};

/// Signed distance and shortest vector at the points of an OccupancySamples.
struct DistanceSamples {
  FMatrix sdf;  ///< n x 1
  FMatrix sv;   ///< n x 2
};

struct SampleRecord {
  std::int64_t index = 0;
  std::string split;       ///< "train" or "test"
  nlohmann::json geometry; ///< enough to rebuild the GeometryInstance
  std::string prior_tag;

  FMatrix mesh_points;  ///< point cloud a_k, N x 2
  Bits mesh_occupancy;

  // Present iff the record belongs to the physics portion.
  std::optional<FMatrix> physics_mesh;    ///< N x 1
  std::optional<FMatrix> physics_points;  ///< N' x 2
  std::optional<FMatrix> physics_values;  ///< N' x 1
  Bits physics_occupancy;

  OccupancySamples occ_rand;
  OccupancySamples occ_perturbed;
  std::optional<DistanceSamples> dist_rand;
  std::optional<DistanceSamples> dist_perturbed;

  std::optional<FMatrix> globals;  ///< 1 x g

  bool has_physics() const { return physics_values.has_value(); }
};

Container to_container(const SampleRecord& r);
SampleRecord from_container(const Container& c);

void write_record(const std::filesystem::path& path, const SampleRecord& r);
SampleRecord read_record(const std::filesystem::path& path);

/// Rebuilds the geometry from the record's stored description and seed.
geometry::GeometryInstance rebuild_geometry(const nlohmann::json& description);

FMatrix to_float(const geometry::PointSet& p);
geometry::PointSet to_double(const FMatrix& p);

}  // namespace geopre::dataio
