#pragma once

#include "geopre/geometry/types.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace geopre::solver {

/// Node-centred field on a uniform grid covering [0,1]^2; values(i, j) is the
/// value at (i*hx, j*hy).
struct GridField {
  int nx = 0;
  int ny = 0;
  Eigen::MatrixXd values;

  GridField() = default;
  GridField(int nx_, int ny_, double fill = 0.0) : nx(nx_), ny(ny_), values(Eigen::MatrixXd::Constant(nx_, ny_, fill)) {}

  double hx() const { return 1.0 / (nx - 1); }
  double hy() const { return 1.0 / (ny - 1); }
  geometry::Vec2 node(int i, int j) const { return {i * hx(), j * hy()}; }
};

struct MaterialFields {
  GridField eps;
  GridField rho;
};

struct MaterialValues {
  double eps_object = 15.0;
  double rho_object = 1.0;
  double eps_background = 1.0;
  double rho_background = 0.0;
};

/// Per-node materials from the interface occupancy (1 -> object values).
MaterialFields rasterize_materials(const geometry::GeometryInstance& g, int nx, const MaterialValues& values = {});

/// Interior-node system matrix of -div(eps grad phi) with harmonic-mean face
/// permittivities, scaled by h^2; Dirichlet phi=0 on the boundary.
Eigen::SparseMatrix<double> assemble_poisson(const MaterialFields& mat);

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Conjugate gradient (Jacobi-preconditioned) to relative residual `tol`.
/// Throws not_converged after 10*nx^2 iterations.
GridField solve_poisson(const MaterialFields& mat, double tol = 1e-10, SolveStats* stats = nullptr);

/// Bilinear interpolation; throws invalid_argument for points outside [0,1]^2.
Eigen::VectorXd interp_bilinear(const GridField& field, const geometry::PointSet& points);

}  // namespace geopre::solver
