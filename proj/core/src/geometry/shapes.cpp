#include "geopre/geometry/shapes.hpp"

#include "geopre/common/error.hpp"
#include "geopre/common/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace geopre::geometry {

std::string VoidPrior::tag() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_a%.2f_b%.2f", shape == VoidShape::ellipse ? "ellipse" : "rectangle", a, b);
  return buf;
}

VoidPrior VoidPrior::parse(const std::string& tag) {
  VoidPrior p;
  char shape[32] = {0};
  if (std::sscanf(tag.c_str(), "%31[a-z]_a%lf_b%lf", shape, &p.a, &p.b) != 3)
    fail(Errc::config, "unrecognised void prior tag '" + tag + "'");
  const std::string s = shape;
  if (s == "ellipse") p.shape = VoidShape::ellipse;
  else if (s == "rectangle") p.shape = VoidShape::rectangle;
  else fail(Errc::config, "unknown void shape '" + s + "'");
  return p;
}

double prior_radius(const VoidPrior& prior, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  if (prior.shape == VoidShape::ellipse) {
    return prior.a * prior.b / std::sqrt(prior.b * prior.b * c * c + prior.a * prior.a * s * s);
  }
  const double rx = std::abs(c) > 1e-15 ? prior.a / std::abs(c) : INFINITY;
  const double ry = std::abs(s) > 1e-15 ? prior.b / std::abs(s) : INFINITY;
  return std::min(rx, ry);
}

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool segments_cross(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const double d1 = cross(q2 - q1, p1 - q1);
  const double d2 = cross(q2 - q1, p2 - q1);
  const double d3 = cross(p2 - p1, q1 - p1);
  const double d4 = cross(p2 - p1, q2 - p1);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

}  // namespace

bool is_simple_closed(std::span<const Vec2> v) {
  const std::size_t n = v.size() - 1;  // edges
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 lo_i = v[i].cwiseMin(v[i + 1]);
    const Vec2 hi_i = v[i].cwiseMax(v[i + 1]);
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through the closing vertex
      const Vec2 lo_j = v[j].cwiseMin(v[j + 1]);
      const Vec2 hi_j = v[j].cwiseMax(v[j + 1]);
      if ((hi_i.array() < lo_j.array()).any() || (hi_j.array() < lo_i.array()).any()) continue;
      if (segments_cross(v[i], v[i + 1], v[j], v[j + 1])) return false;
    }
  }
  return true;
}

GeometryInstance make_void_geometry(const VoidPrior& prior, const GrfParams& grf, int n_theta,
                                    std::uint64_t seed) {
  constexpr int kRetries = 8;
  const Vec2 center(0.5, 0.5);
  for (int attempt = 0; attempt < kRetries; ++attempt) {
    const std::uint64_t s = attempt == 0 ? seed : derive_seed(seed, tag::grf, attempt);
    const Eigen::VectorXd noise = periodic_grf(grf.amplitude, grf.corr_length, n_theta, s);
    ClosedCurve curve;
    curve.center = center;
    curve.vertices.reserve(n_theta + 1);
    for (int k = 0; k < n_theta; ++k) {
      const double theta = 2.0 * std::numbers::pi * k / n_theta;
      const double r = std::clamp(prior_radius(prior, theta) + noise[k], kVoidRadiusMin, kVoidRadiusMax);
      curve.vertices.emplace_back(center.x() + r * std::cos(theta), center.y() + r * std::sin(theta));
    }
    curve.vertices.push_back(curve.vertices.front());
    if (!is_simple_closed(curve.vertices)) continue;
    GeometryInstance g;
    g.kind = GeometryKind::void_region;
    g.boundary = std::move(curve);
    g.prior_tag = prior.tag();
    g.seed = seed;
    return g;
  }
  fail(Errc::degenerate_geometry, "make_void_geometry: self-intersecting void after retries");
}

std::vector<double> void_radii(const GeometryInstance& g) {
  const auto& c = std::get<ClosedCurve>(g.boundary);
  std::vector<double> r;
  r.reserve(c.vertices.size() - 1);
  for (std::size_t i = 0; i + 1 < c.vertices.size(); ++i) r.push_back((c.vertices[i] - c.center).norm());
  return r;
}

CubicSpline::CubicSpline(double h, std::vector<double> values) : h_(h), y_(std::move(values)) {
  const int n = static_cast<int>(y_.size());
  require(n >= 4, Errc::invalid_argument, "CubicSpline needs at least 4 knots");
  // Unknowns: second derivatives m_0..m_{n-1}. Interior rows are the usual
  // C2 conditions; first/last rows impose a continuous third derivative at
  // knots 1 and n-2 (not-a-knot).
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  a(0, 0) = 1.0; a(0, 1) = -2.0; a(0, 2) = 1.0;
  a(n - 1, n - 3) = 1.0; a(n - 1, n - 2) = -2.0; a(n - 1, n - 1) = 1.0;
  for (int i = 1; i < n - 1; ++i) {
    a(i, i - 1) = 1.0;
    a(i, i) = 4.0;
    a(i, i + 1) = 1.0;
    rhs[i] = 6.0 * (y_[i + 1] - 2.0 * y_[i] + y_[i - 1]) / (h_ * h_);
  }
  const Eigen::VectorXd m = a.fullPivLu().solve(rhs);
  m_.assign(m.data(), m.data() + n);
}

double CubicSpline::operator()(double t) const {
  const int n = static_cast<int>(y_.size());
  int i = static_cast<int>(std::floor(t / h_));
  i = std::clamp(i, 0, n - 2);
  const double t0 = i * h_;
  const double a = (t0 + h_ - t) / h_;
  const double b = (t - t0) / h_;
  return a * y_[i] + b * y_[i + 1] +
         ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h_ * h_ / 6.0;
}

GeometryInstance make_interface_geometry(int prior_type, std::uint64_t seed, const InterfaceOptions& options) {
  require(prior_type == 1 || prior_type == 2, Errc::invalid_argument, "interface prior type must be 1 or 2");
  const double x_top = prior_type == 1 ? 0.3 : 0.7;
  const double x_bottom = prior_type == 1 ? 0.7 : 0.3;
  constexpr int n = kInterfaceControlPoints;
  const double h = 1.0 / (n - 1);

  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> jitter(-options.perturbation, options.perturbation);
  OpenCurve curve;
  std::vector<double> xs(n);
  for (int k = 0; k < n; ++k) {
    const double frac = static_cast<double>(k) / (n - 1);
    const double dx = options.perturbation > 0.0 ? jitter(rng) : 0.0;
    xs[k] = x_top + (x_bottom - x_top) * frac + dx;
    curve.control_points.emplace_back(xs[k], 1.0 - frac);
  }

  // Spline parameter t = 1 - y runs top to bottom; knots are t_k = k*h.
  const CubicSpline spline(h, xs);
  const int m = options.samples_per_interval;
  curve.samples.reserve((n - 1) * m + 1);
  for (int k = 0; k < n - 1; ++k) {
    for (int j = 0; j < m; ++j) {
      const double t = k * h + j * h / m;
      const double x = j == 0 ? xs[k] : spline(t);
      curve.samples.emplace_back(std::clamp(x, options.x_min, options.x_max), 1.0 - t);
    }
  }
  curve.samples.emplace_back(std::clamp(xs[n - 1], options.x_min, options.x_max), 0.0);

  GeometryInstance g;
  g.kind = GeometryKind::interface;
  g.boundary = std::move(curve);
  g.prior_tag = prior_type == 1 ? "interface1" : "interface2";
  g.seed = seed;
  return g;
}

}  // namespace geopre::geometry
