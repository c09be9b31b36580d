#pragma once

#include "geopre/geometry/types.hpp"

#include <cstdint>

namespace geopre::geometry {

PointSet sample_uniform_points(const Domain& domain, int n, std::uint64_t seed);

/// Adds i.i.d. N(0, sigma^2) to every coordinate. Results are not clamped.
PointSet perturb_points(const PointSet& points, double sigma, std::uint64_t seed);

inline constexpr double kDefaultPerturbSigma = 0.02;
inline constexpr double kMeshNormalSigma = 0.02;

/// Mesh-like point cloud on the occupancy-1 region: round(boundary_fraction*n)
/// points offset inward from the boundary by |N(0, 0.02)|, the rest uniform
/// over the region by rejection.
PointSet mesh_points(const GeometryInstance& g, int n, double boundary_fraction, std::uint64_t seed,
                     const Domain& domain = Domain::unit_square());

/// Mesh-like point cloud over the whole domain: round(boundary_fraction*n)
/// points offset from the boundary by N(0, 0.02) to either side, the rest
/// uniform over the domain.
PointSet mesh_points_domain(const GeometryInstance& g, int n, double boundary_fraction, std::uint64_t seed,
                            const Domain& domain = Domain::unit_square());

}  // namespace geopre::geometry
