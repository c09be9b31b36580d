#include "geopre/geometry/types.hpp"

namespace geopre::geometry {

std::span<const Vec2> GeometryInstance::polyline() const {
  if (const auto* c = std::get_if<ClosedCurve>(&boundary)) return c->vertices;
  return std::get<OpenCurve>(boundary).samples;
}

PointSet to_point_set(std::span<const Vec2> pts) {
  PointSet out(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return out;
}

}  // namespace geopre::geometry
