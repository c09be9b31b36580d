#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace geopre::geometry {

using Vec2 = Eigen::Vector2d;
/// n×2 row-major point array; all in-scope geometry is two-dimensional.
using PointSet = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

inline constexpr int kDim = 2;

struct Domain {
  Vec2 lower{0.0, 0.0};
  Vec2 upper{1.0, 1.0};

  static Domain unit_square() { return {}; }
  bool contains(const Vec2& p) const {
    return p.x() >= lower.x() && p.x() <= upper.x() && p.y() >= lower.y() && p.y() <= upper.y();
  }
  Vec2 extent() const { return upper - lower; }
  double area() const { return extent().x() * extent().y(); }
};

/// Closed polyline; vertices.front() == vertices.back().
struct ClosedCurve {
  std::vector<Vec2> vertices;
  Vec2 center{0.5, 0.5};
};

/// Interface curve running from the top edge (y=1) to the bottom edge (y=0).
struct OpenCurve {
  std::vector<Vec2> control_points;
  std::vector<Vec2> samples;
};

enum class GeometryKind { void_region, interface };

struct GeometryInstance {
  GeometryKind kind = GeometryKind::void_region;
  std::variant<ClosedCurve, OpenCurve> boundary;
  std::string prior_tag;
  std::uint64_t seed = 0;

  /// Dense boundary polyline: void curve vertices or interface samples.
  std::span<const Vec2> polyline() const;
};

/// Query points with their occupancy bits.
struct ProxySamples {
  PointSet points;
  std::vector<std::uint8_t> occupancy;
};

struct DistanceFields {
  Eigen::VectorXd sdf;  ///< negative on the occupancy-1 side
  PointSet sv;          ///< nearest boundary point minus query point
};

PointSet to_point_set(std::span<const Vec2> pts);

}  // namespace geopre::geometry
