#include "geopre/geometry/sampling.hpp"

#include "geopre/common/error.hpp"
#include "geopre/common/rng.hpp"
#include "geopre/geometry/fields.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace geopre::geometry {

PointSet sample_uniform_points(const Domain& domain, int n, std::uint64_t seed) {
  require(n >= 0, Errc::invalid_argument, "sample_uniform_points: n must be non-negative");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> ux(domain.lower.x(), domain.upper.x());
  std::uniform_real_distribution<double> uy(domain.lower.y(), domain.upper.y());
  PointSet out(n, 2);
  for (int i = 0; i < n; ++i) {
    out(i, 0) = ux(rng);
    out(i, 1) = uy(rng);
  }
  return out;
}

PointSet perturb_points(const PointSet& points, double sigma, std::uint64_t seed) {
  require(sigma >= 0.0, Errc::invalid_argument, "perturb_points: sigma must be non-negative");
  if (sigma == 0.0) return points;
  Rng rng = make_rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  PointSet out = points;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out(i, 0) += noise(rng);
    out(i, 1) += noise(rng);
  }
  return out;
}

PointSet mesh_points(const GeometryInstance& g, int n, double boundary_fraction, std::uint64_t seed,
                     const Domain& domain) {
  require(n >= 16, Errc::invalid_argument, "mesh_points: n must be >= 16");
  require(boundary_fraction >= 0.0 && boundary_fraction <= 1.0, Errc::invalid_argument,
          "mesh_points: boundary_fraction must lie in [0,1]");
  const OccupancyEvaluator occ(g);
  const auto line = g.polyline();

  std::vector<double> cumulative(line.size(), 0.0);
  for (std::size_t i = 1; i < line.size(); ++i) cumulative[i] = cumulative[i - 1] + (line[i] - line[i - 1]).norm();
  const double total_length = cumulative.back();

  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, kMeshNormalSigma);

  const int n_boundary = static_cast<int>(std::lround(boundary_fraction * n));
  PointSet out(n, 2);
  int filled = 0;
  long attempts = 0;
  const long max_attempts = 100L * std::max(n, 1);

  auto give_up = [&](const char* what) {
    std::ostringstream msg;
    msg << "mesh_points: acceptance rate below 1% while sampling " << what << " (" << g.prior_tag
        << ", seed " << g.seed << ")";
    fail(Errc::degenerate_geometry, msg.str());
  };

  while (filled < n_boundary) {
    if (++attempts > max_attempts) give_up("near-boundary points");
    const double s = unit(rng) * total_length;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
    const std::size_t seg = std::clamp<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), 1, line.size() - 1) - 1;
    const double seg_len = cumulative[seg + 1] - cumulative[seg];
    const double t = seg_len > 0.0 ? (s - cumulative[seg]) / seg_len : 0.0;
    const Vec2 a = line[seg];
    const Vec2 b = line[seg + 1];
    const Vec2 p = a + t * (b - a);
    const Vec2 tangent = (b - a).normalized();
    Vec2 normal_dir(-tangent.y(), tangent.x());
    if (!occ(p + 1e-6 * normal_dir)) normal_dir = -normal_dir;
    const Vec2 q = p + std::abs(normal(rng)) * normal_dir;
    if (!domain.contains(q) || !occ(q)) continue;
    out.row(filled++) = q.transpose();
  }

  attempts = 0;
  std::uniform_real_distribution<double> ux(domain.lower.x(), domain.upper.x());
  std::uniform_real_distribution<double> uy(domain.lower.y(), domain.upper.y());
  while (filled < n) {
    if (++attempts > max_attempts) give_up("region points");
    const Vec2 q(ux(rng), uy(rng));
    if (!occ(q)) continue;
    out.row(filled++) = q.transpose();
  }
  return out;
}

PointSet mesh_points_domain(const GeometryInstance& g, int n, double boundary_fraction, std::uint64_t seed,
                            const Domain& domain) {
  require(n >= 16, Errc::invalid_argument, "mesh_points_domain: n must be >= 16");
  require(boundary_fraction >= 0.0 && boundary_fraction <= 1.0, Errc::invalid_argument,
          "mesh_points_domain: boundary_fraction must lie in [0,1]");
  const auto line = g.polyline();
  std::vector<double> cumulative(line.size(), 0.0);
  for (std::size_t i = 1; i < line.size(); ++i) cumulative[i] = cumulative[i - 1] + (line[i] - line[i - 1]).norm();

  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, kMeshNormalSigma);
  const int n_boundary = static_cast<int>(std::lround(boundary_fraction * n));
  PointSet out(n, 2);
  int filled = 0;
  long attempts = 0;
  while (filled < n_boundary) {
    if (++attempts > 100L * n) fail(Errc::degenerate_geometry, "mesh_points_domain: boundary lies outside the domain");
    const double s = unit(rng) * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
    const std::size_t seg = std::clamp<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), 1, line.size() - 1) - 1;
    const double seg_len = cumulative[seg + 1] - cumulative[seg];
    const double t = seg_len > 0.0 ? (s - cumulative[seg]) / seg_len : 0.0;
    const Vec2 a = line[seg];
    const Vec2 b = line[seg + 1];
    const Vec2 tangent = (b - a).normalized();
    const Vec2 q = a + t * (b - a) + normal(rng) * Vec2(-tangent.y(), tangent.x());
    if (!domain.contains(q)) continue;
    out.row(filled++) = q.transpose();
  }
  std::uniform_real_distribution<double> ux(domain.lower.x(), domain.upper.x());
  std::uniform_real_distribution<double> uy(domain.lower.y(), domain.upper.y());
  while (filled < n) out.row(filled++) = Vec2(ux(rng), uy(rng)).transpose();
  return out;
}

}  // namespace geopre::geometry
