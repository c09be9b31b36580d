#include "geopre/geometry/fields.hpp"

#include <algorithm>
#include <limits>

namespace geopre::geometry {

namespace {

constexpr double kFar = 1e3;

double is_left(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (p.x() - a.x()) * (b.y() - a.y());
}

int winding_number(std::span<const Vec2> closed, const Vec2& p) {
  int wn = 0;
  for (std::size_t i = 0; i + 1 < closed.size(); ++i) {
    const Vec2& a = closed[i];
    const Vec2& b = closed[i + 1];
    if (a.y() <= p.y()) {
      if (b.y() > p.y() && is_left(a, b, p) > 0) ++wn;
    } else if (b.y() <= p.y() && is_left(a, b, p) < 0) {
      --wn;
    }
  }
  return wn;
}

// Squared distance from p to segment ab and the closest point.
double segment_distance2(const Vec2& a, const Vec2& b, const Vec2& p, Vec2& closest) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  closest = a + t * ab;
  return (p - closest).squaredNorm();
}

}  // namespace

double distance_to_polyline(std::span<const Vec2> polyline, const Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  Vec2 c;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) best = std::min(best, segment_distance2(polyline[i], polyline[i + 1], p, c));
  return std::sqrt(best);
}

OccupancyEvaluator::OccupancyEvaluator(const GeometryInstance& g) : kind_(g.kind), boundary_(g.polyline()) {
  if (kind_ == GeometryKind::void_region) {
    polygon_.assign(boundary_.begin(), boundary_.end());
    return;
  }
  // Interface: extend vertically past both endpoints and close around the x=0 side.
  const Vec2 top = boundary_.front();
  const Vec2 bottom = boundary_.back();
  polygon_.reserve(boundary_.size() + 5);
  polygon_.emplace_back(top.x(), kFar);
  polygon_.insert(polygon_.end(), boundary_.begin(), boundary_.end());
  polygon_.emplace_back(bottom.x(), -kFar);
  polygon_.emplace_back(-kFar, -kFar);
  polygon_.emplace_back(-kFar, kFar);
  polygon_.emplace_back(top.x(), kFar);
}

std::uint8_t OccupancyEvaluator::operator()(const Vec2& p) const {
  if (distance_to_polyline(boundary_, p) < kOnBoundaryTol) return 1;
  const bool in_polygon = winding_number(polygon_, p) != 0;
  if (kind_ == GeometryKind::interface) return in_polygon ? 1 : 0;
  const bool in_square = p.x() >= 0.0 && p.x() <= 1.0 && p.y() >= 0.0 && p.y() <= 1.0;
  return (in_square && !in_polygon) ? 1 : 0;
}

std::vector<std::uint8_t> occupancy_field(const GeometryInstance& g, const PointSet& points) {
  const OccupancyEvaluator occ(g);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) out[static_cast<std::size_t>(i)] = occ(points.row(i).transpose());
  return out;
}

std::uint8_t occupancy_at(const GeometryInstance& g, const Vec2& p) { return OccupancyEvaluator(g)(p); }

DistanceFields distance_fields(const GeometryInstance& g, const PointSet& points) {
  const auto line = g.polyline();
  const OccupancyEvaluator occ(g);
  DistanceFields out;
  out.sdf.resize(points.rows());
  out.sv.resize(points.rows(), 2);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Vec2 p = points.row(i).transpose();
    double best = std::numeric_limits<double>::infinity();
    Vec2 best_pt = line.front();
    Vec2 c;
    for (std::size_t s = 0; s + 1 < line.size(); ++s) {
      const double d2 = segment_distance2(line[s], line[s + 1], p, c);
      // Relative slack keeps the lowest index on floating-point near-ties.
      if (d2 < best * (1.0 - 1e-12)) {
        best = d2;
        best_pt = c;
      }
    }
    const Vec2 sv = best_pt - p;
    out.sv.row(i) = sv.transpose();
    const double d = sv.norm();
    out.sdf[i] = occ(p) ? -d : d;
  }
  return out;
}

}  // namespace geopre::geometry
