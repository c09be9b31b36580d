#include <doctest.h>

#include "geopre/geometry/sampling.hpp"
#include "geopre/geometry/shapes.hpp"
#include "geopre/solver/poisson.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace geopre;
using namespace geopre::solver;
using std::numbers::pi;

namespace {

double manufactured_error(int nx) {
  MaterialFields mat{GridField(nx, nx, 1.0), GridField(nx, nx, 0.0)};
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nx; ++j) {
      const auto p = mat.rho.node(i, j);
      mat.rho.values(i, j) = 2 * pi * pi * std::sin(pi * p.x()) * std::sin(pi * p.y());
    }
  const auto phi = solve_poisson(mat);
  double err = 0.0;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nx; ++j) {
      const auto p = phi.node(i, j);
      err = std::max(err, std::abs(phi.values(i, j) - std::sin(pi * p.x()) * std::sin(pi * p.y())));
    }
  return err;
}

}  // namespace

TEST_CASE("rasterized materials follow occupancy") {
  geometry::InterfaceOptions flat;
  flat.perturbation = 0.0;
  const auto g = geometry::make_interface_geometry(1, 1, flat);
  const auto mat = rasterize_materials(g, 65);
  // node (0.1, 0.5) is i=6.4 -> use (0.125, 0.5) = (8, 32)
  CHECK(mat.eps.values(8, 32) == 15.0);
  CHECK(mat.rho.values(8, 32) == 1.0);
  CHECK(mat.eps.values(58, 32) == 1.0);
  CHECK(mat.rho.values(58, 32) == 0.0);
  CHECK((mat.eps.values.array() == 15.0).count() == (mat.rho.values.array() == 1.0).count());
}

TEST_CASE("zero charge gives zero potential") {
  MaterialFields mat{GridField(65, 65, 1.0), GridField(65, 65, 0.0)};
  mat.eps.values(10, 10) = 15.0;
  const auto phi = solve_poisson(mat);
  CHECK(phi.values.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("system matrix is symmetric") {
  const auto g = geometry::make_interface_geometry(2, 8);
  const auto a = assemble_poisson(rasterize_materials(g, 33));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  Eigen::VectorXd u(a.rows()), v(a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    u[i] = n(rng);
    v[i] = n(rng);
  }
  CHECK(std::abs((a * u).dot(v) - u.dot(a * v)) < 1e-12 * (a * u).norm() * v.norm());
}

TEST_CASE("manufactured solution converges at second order") {
  const double e129 = manufactured_error(129);
  const double e257 = manufactured_error(257);
  CHECK(e129 <= 1e-3);
  CHECK(e257 / e129 >= 0.2);
  CHECK(e257 / e129 <= 0.35);
}

TEST_CASE("symmetric materials give a transposition-invariant solution") {
  const int nx = 65;
  MaterialFields mat{GridField(nx, nx, 1.0), GridField(nx, nx, 0.0)};
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nx; ++j)
      if (i + j < nx) {
        mat.eps.values(i, j) = 15.0;
        mat.rho.values(i, j) = 1.0;
      }
  const auto phi = solve_poisson(mat);
  CHECK((phi.values - phi.values.transpose()).cwiseAbs().maxCoeff() < 1e-8 * phi.values.cwiseAbs().maxCoeff());
}

TEST_CASE("bilinear interpolation") {
  GridField f(17, 17);
  for (int i = 0; i < 17; ++i)
    for (int j = 0; j < 17; ++j) f.values(i, j) = f.node(i, j).x() + 2 * f.node(i, j).y();
  const auto pts = geometry::sample_uniform_points(geometry::Domain::unit_square(), 200, 5);
  const auto vals = interp_bilinear(f, pts);
  for (int k = 0; k < pts.rows(); ++k) CHECK(std::abs(vals[k] - (pts(k, 0) + 2 * pts(k, 1))) < 1e-12);

  geometry::PointSet node(1, 2);
  node << 3.0 / 16, 5.0 / 16;
  CHECK(interp_bilinear(f, node)[0] == f.values(3, 5));
  node << 1.0 + 1e-9, 0.5;
  CHECK_THROWS(interp_bilinear(f, node));
}

TEST_CASE("bilinear refinement self-consistency") {
  auto smooth = [](double x, double y) { return std::sin(3 * x) * std::cos(2 * y); };
  auto grid = [&](int n) {
    GridField f(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) f.values(i, j) = smooth(f.node(i, j).x(), f.node(i, j).y());
    return f;
  };
  const auto pts = geometry::sample_uniform_points(geometry::Domain::unit_square(), 1000, 6);
  const auto a = interp_bilinear(grid(257), pts);
  const auto b = interp_bilinear(grid(513), pts);
  double err513 = 0.0;
  for (int k = 0; k < pts.rows(); ++k) err513 = std::max(err513, std::abs(b[k] - smooth(pts(k, 0), pts(k, 1))));
  CHECK((a - b).cwiseAbs().maxCoeff() <= 4 * err513 + 1e-15);
}
