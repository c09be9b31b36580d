#include "geopre/solver/poisson.hpp"

#include "geopre/common/error.hpp"
#include "geopre/geometry/fields.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace geopre::solver {

MaterialFields rasterize_materials(const geometry::GeometryInstance& g, int nx, const MaterialValues& values) {
  require(g.kind == geometry::GeometryKind::interface, Errc::invalid_argument,
          "rasterize_materials: geometry must be an interface");
  require(nx >= 2, Errc::invalid_argument, "rasterize_materials: nx must be >= 2");
  const geometry::OccupancyEvaluator occ(g);
  MaterialFields mat{GridField(nx, nx), GridField(nx, nx)};
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nx; ++j) {
      const bool object = occ(mat.eps.node(i, j)) != 0;
      mat.eps.values(i, j) = object ? values.eps_object : values.eps_background;
      mat.rho.values(i, j) = object ? values.rho_object : values.rho_background;
    }
  }
  return mat;
}

namespace {

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

}  // namespace

Eigen::SparseMatrix<double> assemble_poisson(const MaterialFields& mat) {
  const int nx = mat.eps.nx;
  const int ny = mat.eps.ny;
  require(nx == ny, Errc::invalid_argument, "assemble_poisson: square grids only");
  require((mat.eps.values.array() > 0.0).all(), Errc::invalid_argument, "assemble_poisson: eps must be positive");
  const int mx = nx - 2;
  const int my = ny - 2;
  auto index = [mx](int i, int j) { return (j - 1) * mx + (i - 1); };
  const auto& e = mat.eps.values;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mx) * my * 5);
  for (int j = 1; j < ny - 1; ++j) {
    for (int i = 1; i < nx - 1; ++i) {
      const int row = index(i, j);
      const int di[4] = {-1, 1, 0, 0};
      const int dj[4] = {0, 0, -1, 1};
      double diag = 0.0;
      for (int k = 0; k < 4; ++k) {
        const int ni = i + di[k];
        const int nj = j + dj[k];
        const double w = harmonic(e(i, j), e(ni, nj));
        diag += w;
        if (ni >= 1 && ni <= nx - 2 && nj >= 1 && nj <= ny - 2) triplets.emplace_back(row, index(ni, nj), -w);
      }
      triplets.emplace_back(row, row, diag);
    }
  }
  Eigen::SparseMatrix<double> a(mx * my, mx * my);
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

GridField solve_poisson(const MaterialFields& mat, double tol, SolveStats* stats) {
  const int nx = mat.eps.nx;
  require(nx >= 3 && mat.eps.ny == nx && mat.rho.nx == nx && mat.rho.ny == nx, Errc::invalid_argument,
          "solve_poisson: inconsistent grids");
  const int mx = nx - 2;
  const double h = mat.eps.hx();
  const Eigen::SparseMatrix<double> a = assemble_poisson(mat);

  Eigen::VectorXd b(mx * mx);
  for (int j = 1; j < nx - 1; ++j)
    for (int i = 1; i < nx - 1; ++i) b[(j - 1) * mx + (i - 1)] = h * h * mat.rho.values(i, j);

  GridField phi(nx, nx, 0.0);
  if (b.squaredNorm() == 0.0) {
    if (stats) *stats = {};
    return phi;
  }

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(10 * nx * nx);
  cg.compute(a);
  const Eigen::VectorXd x = cg.solve(b);
  const double rel = (b - a * x).norm() / b.norm();
  if (cg.info() != Eigen::Success || !(rel <= tol * 10.0)) {
    std::ostringstream msg;
    msg << "solve_poisson: CG did not converge in " << cg.iterations() << " iterations (relative residual "
        << rel << ", target " << tol << ")";
    fail(Errc::not_converged, msg.str());
  }
  if (stats) *stats = {static_cast<int>(cg.iterations()), rel};
  for (int j = 1; j < nx - 1; ++j)
    for (int i = 1; i < nx - 1; ++i) phi.values(i, j) = x[(j - 1) * mx + (i - 1)];
  return phi;
}

Eigen::VectorXd interp_bilinear(const GridField& field, const geometry::PointSet& points) {
  Eigen::VectorXd out(points.rows());
  const double hx = field.hx();
  const double hy = field.hy();
  for (Eigen::Index k = 0; k < points.rows(); ++k) {
    const double x = points(k, 0);
    const double y = points(k, 1);
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
      std::ostringstream msg;
      msg << "interp_bilinear: point (" << x << ", " << y << ") outside the domain";
      fail(Errc::invalid_argument, msg.str());
    }
    const int i = std::min(static_cast<int>(x / hx), field.nx - 2);
    const int j = std::min(static_cast<int>(y / hy), field.ny - 2);
    const double tx = x / hx - i;
    const double ty = y / hy - j;
    const auto& v = field.values;
    out[k] = (1 - tx) * (1 - ty) * v(i, j) + tx * (1 - ty) * v(i + 1, j) + (1 - tx) * ty * v(i, j + 1) +
             tx * ty * v(i + 1, j + 1);
  }
  return out;
}

}  // namespace geopre::solver
