#pragma once

#include "geopre/geometry/types.hpp"

#include <cstdint>
#include <vector>

namespace geopre::geometry {

/// Points closer than this to the boundary polyline count as inside (1).
inline constexpr double kOnBoundaryTol = 1e-12;

/// Reusable point-in-region test for one geometry. Holds the closed
/// polygon(s) the winding number runs against.
class OccupancyEvaluator {
 public:
  explicit OccupancyEvaluator(const GeometryInstance& g);
  std::uint8_t operator()(const Vec2& p) const;

 private:
  GeometryKind kind_;
  std::span<const Vec2> boundary_;
  std::vector<Vec2> polygon_;  // closed; for voids this is the void curve
};

/// Occupancy bits by winding number. Voids: 1 in the unit square minus the
/// void interior. Interfaces: 1 on the side containing the x=0 edge, with
/// the interface extended vertically beyond y in [0,1].
std::vector<std::uint8_t> occupancy_field(const GeometryInstance& g, const PointSet& points);
std::uint8_t occupancy_at(const GeometryInstance& g, const Vec2& p);

/// Nearest-point vector and signed distance against the dense polyline.
/// Ties go to the lowest segment index.
DistanceFields distance_fields(const GeometryInstance& g, const PointSet& points);

/// Unsigned distance from p to the polyline (helper for samplers and tests).
double distance_to_polyline(std::span<const Vec2> polyline, const Vec2& p);

}  // namespace geopre::geometry
