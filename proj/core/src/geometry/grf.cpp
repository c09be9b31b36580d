#include "geopre/geometry/grf.hpp"

#include "geopre/common/error.hpp"
#include "geopre/common/rng.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

namespace geopre::geometry {

Eigen::MatrixXd grf_covariance(double corr_length, int n_theta) {
  Eigen::MatrixXd k(n_theta, n_theta);
  const double inv = 1.0 / (2.0 * corr_length * corr_length);
  for (int i = 0; i < n_theta; ++i) {
    for (int j = 0; j < n_theta; ++j) {
      const double dt = 2.0 * std::numbers::pi * (i - j) / n_theta;
      const double chord = 2.0 * std::sin(0.5 * dt);
      k(i, j) = std::exp(-chord * chord * inv);
    }
  }
  return k;
}

namespace {

std::shared_ptr<const Eigen::MatrixXd> cholesky_factor(double corr_length, int n_theta) {
  static std::mutex mutex;
  static std::map<std::pair<int, double>, std::shared_ptr<const Eigen::MatrixXd>> cache;
  const auto key = std::make_pair(n_theta, corr_length);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const Eigen::MatrixXd k = grf_covariance(corr_length, n_theta);
  // The SE kernel is numerically low-rank; escalate jitter until LLT succeeds.
  for (double jitter = 1e-10; jitter <= 1e-4; jitter *= 10.0) {
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(kj);
    if (llt.info() == Eigen::Success) {
      auto factor = std::make_shared<const Eigen::MatrixXd>(llt.matrixL());
      std::lock_guard lock(mutex);
      cache.emplace(key, factor);
      return factor;
    }
  }
  std::ostringstream msg;
  msg << "GRF covariance not positive definite after jitter 1e-4 (n_theta=" << n_theta
      << ", corr_length=" << corr_length << ")";
  fail(Errc::numerical, msg.str());
}

}  // namespace

Eigen::VectorXd periodic_grf(double amplitude, double corr_length, int n_theta, std::uint64_t seed) {
  require(n_theta >= 16, Errc::invalid_argument, "periodic_grf: n_theta must be >= 16");
  require(amplitude >= 0.0, Errc::invalid_argument, "periodic_grf: amplitude must be non-negative");
  require(corr_length > 0.0, Errc::invalid_argument, "periodic_grf: corr_length must be positive");
  if (amplitude == 0.0) return Eigen::VectorXd::Zero(n_theta);

  const auto factor = cholesky_factor(corr_length, n_theta);
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n_theta);
  for (int i = 0; i < n_theta; ++i) z[i] = normal(rng);
  Eigen::VectorXd out = factor->triangularView<Eigen::Lower>() * z;
  return amplitude * out;
}

}  // namespace geopre::geometry
