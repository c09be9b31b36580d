#pragma once

#include "geopre/geometry/grf.hpp"
#include "geopre/geometry/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace geopre::geometry {

enum class VoidShape { ellipse, rectangle };

struct VoidPrior {
  VoidShape shape = VoidShape::ellipse;
  double a = 0.3;  ///< horizontal semi-axis / half-edge
  double b = 0.15; ///< vertical semi-axis / half-edge

  std::string tag() const;
  static VoidPrior parse(const std::string& tag);
};

inline constexpr double kVoidRadiusMin = 0.05;
inline constexpr double kVoidRadiusMax = 0.45;
inline constexpr int kVoidThetaSamples = 512;

/// Polar radius of the centred prior shape at angle theta.
double prior_radius(const VoidPrior& prior, double theta);

/// r(theta) = f(a,b,theta) + GRF(A,l,theta), clamped to [0.05, 0.45] and
/// centred at (0.5, 0.5). Retries with offset seeds if the polyline is not
/// simple; throws degenerate_geometry after the retry budget.
GeometryInstance make_void_geometry(const VoidPrior& prior, const GrfParams& grf, int n_theta,
                                    std::uint64_t seed);

/// Radii of a void instance at its polyline vertices (excluding the closing one).
std::vector<double> void_radii(const GeometryInstance& g);

struct InterfaceOptions {
  double perturbation = 0.2;  ///< half-width of the uniform horizontal jitter
  int samples_per_interval = 57;
  double x_min = 0.02;
  double x_max = 0.98;
};

inline constexpr int kInterfaceControlPoints = 10;

/// Interface from 10 jittered points on the prior segment (type 1:
/// (0.3,1)->(0.7,0); type 2: (0.7,1)->(0.3,0)), interpolated with a
/// not-a-knot cubic spline x(y).
GeometryInstance make_interface_geometry(int prior_type, std::uint64_t seed,
                                         const InterfaceOptions& options = {});

/// Cubic spline through uniformly spaced knots t_k = k*h (not-a-knot ends).
class CubicSpline {
 public:
  CubicSpline(double h, std::vector<double> values);
  double operator()(double t) const;

 private:
  double h_;
  std::vector<double> y_;
  std::vector<double> m_;  // second derivatives at knots
};

/// True iff the closed polyline has no crossing between non-adjacent edges.
bool is_simple_closed(std::span<const Vec2> closed_vertices);

}  // namespace geopre::geometry
