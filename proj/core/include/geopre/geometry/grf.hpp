#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace geopre::geometry {

struct GrfParams {
  double amplitude = 0.05;
  double corr_length = 0.6;  ///< radians
};

/// One draw of a zero-mean periodic Gaussian random field on the circle,
/// evaluated at `n_theta` uniform angles theta_k = 2*pi*k/n_theta.
///
/// Covariance is the chordal squared-exponential kernel
///   k(dt) = A^2 exp(-(2 sin(dt/2))^2 / (2 l^2)),
/// which is positive semi-definite on the circle and periodic by construction.
/// The Cholesky factor of the unit-amplitude matrix is cached per (n, l).
Eigen::VectorXd periodic_grf(double amplitude, double corr_length, int n_theta, std::uint64_t seed);

/// Unit-amplitude covariance matrix (exposed for tests).
Eigen::MatrixXd grf_covariance(double corr_length, int n_theta);

}  // namespace geopre::geometry
