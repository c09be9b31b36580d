#pragma once

// Independent reference computations used by unit and acceptance tests.

#include "geopre/geometry/types.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using geopre::geometry::GeometryInstance;
using geopre::geometry::GeometryKind;
using geopre::geometry::Vec2;

/// Closed polygon bounding the occupancy-1 region, built separately from the
/// library: the void curve itself (occupancy is its complement inside the
/// square) or the interface closed through two far-left points.
inline std::vector<Vec2> region_polygon(const GeometryInstance& g) {
  auto pl = g.polyline();
  std::vector<Vec2> poly(pl.begin(), pl.end());
  if (g.kind == GeometryKind::interface) {
    const Vec2 first = poly.front();
    const Vec2 last = poly.back();
    poly.emplace_back(-5.0, last.y());
    poly.emplace_back(-5.0, first.y());
    poly.push_back(first);
  }
  return poly;
}

/// Crossing parity of the ray p + t*(cos a, sin a), t > 0.
inline bool ray_parity(const std::vector<Vec2>& poly, const Vec2& p, double angle) {
  const Vec2 d(std::cos(angle), std::sin(angle));
  int crossings = 0;
  for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
    const Vec2 a = poly[i];
    const Vec2 e = poly[i + 1] - a;
    const double den = d.x() * e.y() - d.y() * e.x();
    if (std::abs(den) < 1e-300) continue;
    const Vec2 w = a - p;
    const double t = (w.x() * e.y() - w.y() * e.x()) / den;
    const double s = (w.x() * d.y() - w.y() * d.x()) / den;
    if (t > 0 && s >= 0 && s < 1) ++crossings;
  }
  return crossings % 2 == 1;
}

/// Majority vote over five random ray directions.
inline std::uint8_t occupancy(const GeometryInstance& g, const std::vector<Vec2>& poly, const Vec2& p,
                              std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  int votes = 0;
  for (int k = 0; k < 5; ++k) votes += ray_parity(poly, p, angle(rng)) ? 1 : 0;
  const bool inside = votes >= 3;
  return g.kind == GeometryKind::void_region ? !inside : inside;
}

struct Nearest {
  Vec2 point;
  double distance = std::numeric_limits<double>::infinity();
};

/// Brute-force nearest point over all polyline segments.
inline Nearest nearest_on_polyline(std::span<const Vec2> pl, const Vec2& p) {
  Nearest best;
  for (std::size_t i = 0; i + 1 < pl.size(); ++i) {
    const Vec2 a = pl[i];
    const Vec2 e = pl[i + 1] - a;
    const double len2 = e.squaredNorm();
    double t = len2 > 0 ? (p - a).dot(e) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 q = a + t * e;
    const double dist = (q - p).norm();
    if (dist < best.distance) best = {q, dist};
  }
  return best;
}

}  // namespace oracle
