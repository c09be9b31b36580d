#pragma once

#include <Eigen/Core>

#include <cmath>

namespace oracle {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Direct double-loop evaluation of the normalised linear attention formula
// for one head.
inline Matrix naive_linear(const Matrix& q, const Matrix& k, const Matrix& v) {
  const int n = static_cast<int>(q.rows()), m = static_cast<int>(k.rows()), c = static_cast<int>(q.cols());
  Matrix qt(n, c), kt(m, c);
  for (int i = 0; i < n; ++i) {
    double z = 0;
    for (int f = 0; f < c; ++f) z += std::exp(q(i, f));
    for (int f = 0; f < c; ++f) qt(i, f) = std::exp(q(i, f)) / z;
  }
  for (int f = 0; f < c; ++f) {
    double z = 0;
    for (int j = 0; j < m; ++j) z += std::exp(k(j, f));
    for (int j = 0; j < m; ++j) kt(j, f) = std::exp(k(j, f)) / z;
  }
  Matrix out(n, v.cols());
  for (int i = 0; i < n; ++i) {
    double den = 0;
    for (int j = 0; j < m; ++j)
      for (int f = 0; f < c; ++f) den += qt(i, f) * kt(j, f);
    for (int e = 0; e < v.cols(); ++e) {
      double num = 0;
      for (int j = 0; j < m; ++j) {
        double w = 0;
        for (int f = 0; f < c; ++f) w += qt(i, f) * kt(j, f);
        num += w * v(j, e);
      }
      out(i, e) = num / den;
    }
  }
  return out;
}

}  // namespace oracle
