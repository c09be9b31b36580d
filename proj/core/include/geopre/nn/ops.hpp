#pragma once

#include "geopre/nn/tape.hpp"

#include <vector>

namespace geopre::nn {

// Products. Shapes follow Eigen conventions; row-major throughout.
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);     ///< a * b
template <typename T> Var<T> matmul_nt(Var<T> a, Var<T> b);  ///< a * b^T
template <typename T> Var<T> matmul_tn(Var<T> a, Var<T> b);  ///< a^T * b
/// x * w + b with w stored (in x out) and b (1 x out).
template <typename T> Var<T> linear(Var<T> x, Var<T> w, Var<T> b);
template <typename T> Var<T> linear(Var<T> x, Var<T> w);

// Elementwise.
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T s);
template <typename T> Var<T> exp(Var<T> a);
template <typename T> Var<T> gelu(Var<T> a);  ///< tanh approximation
/// a (n x c) plus a row vector r (1 x c) broadcast over rows.
template <typename T> Var<T> add_row(Var<T> a, Var<T> r);

// Shape.
template <typename T> Var<T> transpose(Var<T> a);
template <typename T> Var<T> slice_cols(Var<T> a, Eigen::Index start, Eigen::Index len);
template <typename T> Var<T> concat_cols(const std::vector<Var<T>>& parts);

// Normalisation and reductions.
template <typename T> Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5));
template <typename T> Var<T> softmax_rows(Var<T> x);
template <typename T> Var<T> softmax_cols(Var<T> x);
template <typename T> Var<T> col_sum(Var<T> x);   ///< 1 x c
template <typename T> Var<T> row_sum(Var<T> x);   ///< n x 1
/// x_ij / d_i for x (n x c), d (n x 1).
template <typename T> Var<T> div_rows(Var<T> x, Var<T> d);
template <typename T> Var<T> sum(Var<T> x);
template <typename T> Var<T> mean(Var<T> x);

// Losses; all return 1x1.
/// Mean binary cross-entropy on logits, numerically stable form.
template <typename T> Var<T> bce_with_logits(Var<T> logits, const Matrix<T>& targets);
template <typename T> Var<T> mse(Var<T> pred, const Matrix<T>& targets);
/// ||pred - t|| / ||t||.
template <typename T> Var<T> rel_l2(Var<T> pred, const Matrix<T>& targets);
/// mean over entries of 0.5 (mu^2 + sigma^2 - 1 - log sigma^2), sigma = exp(log_sigma).
template <typename T> Var<T> kl_standard_normal(Var<T> mu, Var<T> log_sigma);

}  // namespace geopre::nn
