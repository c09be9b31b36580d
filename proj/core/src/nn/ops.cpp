#include "geopre/nn/ops.hpp"

#include "geopre/common/error.hpp"

#include <cmath>
#include <numbers>

namespace geopre::nn {

namespace {

template <typename T>
void check(bool cond, const char* what) {
  require(cond, Errc::invalid_argument, what);
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  check<T>(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix<T> out;
  out.noalias() = a.value() * b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& t, int self) {
    const Matrix<T>& g = t.grad(self);
    if (t.needs_grad(a.id)) t.grad(a.id).noalias() += g * b.value().transpose();
    if (t.needs_grad(b.id)) t.grad(b.id).noalias() += a.value().transpose() * g;
  });
}

template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  check<T>(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
  Matrix<T> out;
  out.noalias() = a.value() * b.value().transpose();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& t, int self) {
    const Matrix<T>& g = t.grad(self);
    if (t.needs_grad(a.id)) t.grad(a.id).noalias() += g * b.value();
    if (t.needs_grad(b.id)) t.grad(b.id).noalias() += g.transpose() * a.value();
  });
}

template <typename T>
Var<T> matmul_tn(Var<T> a, Var<T> b) {
  check<T>(a.rows() == b.rows(), "matmul_tn: inner dimensions differ");
  Matrix<T> out;
  out.noalias() = a.value().transpose() * b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& t, int self) {
    const Matrix<T>& g = t.grad(self);
    if (t.needs_grad(a.id)) t.grad(a.id).noalias() += b.value() * g.transpose();
    if (t.needs_grad(b.id)) t.grad(b.id).noalias() += a.value() * g;
  });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  check<T>(x.cols() == w.rows(), "linear: input width mismatch");
  check<T>(b.rows() == 1 && b.cols() == w.cols(), "linear: bias shape mismatch");
  Matrix<T> out;
  out.noalias() = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return x.tape->record(std::move(out), {x, w, b}, [x, w, b](Tape<T>& t, int self) {
    const Matrix<T>& g = t.grad(self);
    if (t.needs_grad(x.id)) t.grad(x.id).noalias() += g * w.value().transpose();
    if (t.needs_grad(w.id)) t.grad(w.id).noalias() += x.value().transpose() * g;
    if (t.needs_grad(b.id)) t.grad(b.id) += g.colwise().sum();
  });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> w) {
  return matmul(x, w);
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  check<T>(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  Matrix<T> out = a.value() + b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& t, int self) {
    const Matrix<T>& g = t.grad(self);
    if (t.needs_grad(a.id)) t.grad(a.id) += g;
    if (t.needs_grad(b.id)) t.grad(b.id) += g;
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  check<T>(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  Matrix<T> out = a.value() - b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& t, int self) {
    const Matrix<T>& g = t.grad(self);
    if (t.needs_grad(a.id)) t.grad(a.id) += g;
    if (t.needs_grad(b.id)) t.grad(b.id) -= g;
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  check<T>(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
  Matrix<T> out = a.value().cwiseProduct(b.value());
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& t, int self) {
    const Matrix<T>& g = t.grad(self);
    if (t.needs_grad(a.id)) t.grad(a.id) += g.cwiseProduct(b.value());
    if (t.needs_grad(b.id)) t.grad(b.id) += g.cwiseProduct(a.value());
  });
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
  Matrix<T> out = a.value() * s;
  return a.tape->record(std::move(out), {a}, [a, s](Tape<T>& t, int self) { t.grad(a.id) += t.grad(self) * s; });
}

template <typename T>
Var<T> exp(Var<T> a) {
  Matrix<T> out = a.value().array().exp().matrix();
  return a.tape->record(std::move(out), {a}, [a](Tape<T>& t, int self) {
    t.grad(a.id) += t.grad(self).cwiseProduct(t.value(self));
  });
}

template <typename T>
Var<T> gelu(Var<T> a) {
  constexpr T k = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T c = T(0.044715);
  const auto x = a.value().array();
  Matrix<T> th = (k * (x + c * x.cube())).tanh().matrix();
  Matrix<T> out = (T(0.5) * x * (T(1) + th.array())).matrix();
  return a.tape->record(std::move(out), {a}, [a, th = std::move(th)](Tape<T>& t, int self) {
    const auto x = a.value().array();
    const auto h = th.array();
    const auto d = T(0.5) * (T(1) + h) + T(0.5) * k * x * (T(1) - h.square()) * (T(1) + T(3) * c * x.square());
    t.grad(a.id).array() += t.grad(self).array() * d;
  });
}

template <typename T>
Var<T> add_row(Var<T> a, Var<T> r) {
  check<T>(r.rows() == 1 && r.cols() == a.cols(), "add_row: shape mismatch");
  Matrix<T> out = a.value();
  out.rowwise() += r.value().row(0);
  return a.tape->record(std::move(out), {a, r}, [a, r](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(a.id)) t.grad(a.id) += g;
    if (t.needs_grad(r.id)) t.grad(r.id) += g.colwise().sum();
  });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  Matrix<T> out = a.value().transpose();
  return a.tape->record(std::move(out), {a}, [a](Tape<T>& t, int self) { t.grad(a.id) += t.grad(self).transpose(); });
}

template <typename T>
Var<T> slice_cols(Var<T> a, Eigen::Index start, Eigen::Index len) {
  check<T>(start >= 0 && start + len <= a.cols(), "slice_cols: out of range");
  Matrix<T> out = a.value().middleCols(start, len);
  return a.tape->record(std::move(out), {a}, [a, start, len](Tape<T>& t, int self) {
    t.grad(a.id).middleCols(start, len) += t.grad(self);
  });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  check<T>(!parts.empty(), "concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    check<T>(p.rows() == rows, "concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix<T> out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return parts.front().tape->record(std::move(out), parts, [parts](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      if (t.needs_grad(p.id)) t.grad(p.id) += g.middleCols(at, p.cols());
      at += p.cols();
    }
  });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  const auto& xv = x.value();
  const Eigen::Index n = xv.rows();
  const Eigen::Index c = xv.cols();
  check<T>(gamma.cols() == c && beta.cols() == c, "layer_norm: affine width mismatch");
  Matrix<T> xhat(n, c);
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mu = xv.row(i).mean();
    const auto centered = (xv.row(i).array() - mu);
    const T var = centered.square().mean();
    inv_std[i] = T(1) / std::sqrt(var + eps);
    xhat.row(i) = centered * inv_std[i];
  }
  Matrix<T> out = xhat;
  out.array().rowwise() *= gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  return x.tape->record(std::move(out), {x, gamma, beta},
                        [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(gamma.id)) t.grad(gamma.id) += (g.cwiseProduct(xhat)).colwise().sum();
    if (t.needs_grad(beta.id)) t.grad(beta.id) += g.colwise().sum();
    if (t.needs_grad(x.id)) {
      Matrix<T> dxhat = g;
      dxhat.array().rowwise() *= gamma.value().row(0).array();
      auto& gx = t.grad(x.id);
      const T inv_c = T(1) / static_cast<T>(xhat.cols());
      for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
        const T m1 = dxhat.row(i).sum() * inv_c;
        const T m2 = dxhat.row(i).dot(xhat.row(i)) * inv_c;
        gx.row(i).array() += inv_std[i] * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
      }
    }
  });
}

template <typename T>
Var<T> softmax_rows(Var<T> x) {
  const auto& xv = x.value();
  Matrix<T> out(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const T mx = xv.row(i).maxCoeff();
    out.row(i) = (xv.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return x.tape->record(std::move(out), {x}, [x](Tape<T>& t, int self) {
    const auto& y = t.value(self);
    const auto& g = t.grad(self);
    auto& gx = t.grad(x.id);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const T dot = g.row(i).dot(y.row(i));
      gx.row(i).array() += y.row(i).array() * (g.row(i).array() - dot);
    }
  });
}

template <typename T>
Var<T> softmax_cols(Var<T> x) {
  const auto& xv = x.value();
  const Eigen::Matrix<T, 1, Eigen::Dynamic> mx = xv.colwise().maxCoeff();
  Matrix<T> out = (xv.rowwise() - mx).array().exp().matrix();
  const Eigen::Matrix<T, 1, Eigen::Dynamic> s = out.colwise().sum();
  out.array().rowwise() /= s.array();
  return x.tape->record(std::move(out), {x}, [x](Tape<T>& t, int self) {
    const auto& y = t.value(self);
    const auto& g = t.grad(self);
    const Eigen::Matrix<T, 1, Eigen::Dynamic> dot = g.cwiseProduct(y).colwise().sum();
    t.grad(x.id).array() += y.array() * (g.rowwise() - dot).array();
  });
}

template <typename T>
Var<T> col_sum(Var<T> x) {
  Matrix<T> out = x.value().colwise().sum();
  return x.tape->record(std::move(out), {x}, [x](Tape<T>& t, int self) {
    t.grad(x.id).rowwise() += t.grad(self).row(0);
  });
}

template <typename T>
Var<T> row_sum(Var<T> x) {
  Matrix<T> out = x.value().rowwise().sum();
  return x.tape->record(std::move(out), {x}, [x](Tape<T>& t, int self) {
    t.grad(x.id).colwise() += t.grad(self).col(0);
  });
}

template <typename T>
Var<T> div_rows(Var<T> x, Var<T> d) {
  check<T>(d.cols() == 1 && d.rows() == x.rows(), "div_rows: divisor must be n x 1");
  const Eigen::Matrix<T, Eigen::Dynamic, 1> inv = d.value().col(0).cwiseInverse();
  Matrix<T> out = inv.asDiagonal() * x.value();
  return x.tape->record(std::move(out), {x, d}, [x, d, inv](Tape<T>& t, int self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(x.id)) t.grad(x.id) += inv.asDiagonal() * g;
    if (t.needs_grad(d.id)) {
      // d(out_ij)/d(d_i) = -out_ij / d_i
      const auto& y = t.value(self);
      t.grad(d.id).col(0) -= (g.cwiseProduct(y).rowwise().sum()).cwiseProduct(inv);
    }
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  Matrix<T> out(1, 1);
  out(0, 0) = x.value().sum();
  return x.tape->record(std::move(out), {x}, [x](Tape<T>& t, int self) {
    t.grad(x.id).array() += t.grad(self)(0, 0);
  });
}

template <typename T>
Var<T> mean(Var<T> x) {
  return scale(sum(x), T(1) / static_cast<T>(x.value().size()));
}

template <typename T>
Var<T> bce_with_logits(Var<T> logits, const Matrix<T>& targets) {
  const auto& z = logits.value();
  check<T>(z.rows() == targets.rows() && z.cols() == targets.cols(), "bce_with_logits: shape mismatch");
  const Eigen::Index n = z.size();
  T total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const T zi = z.data()[i];
    const T ti = targets.data()[i];
    total += std::max(zi, T(0)) - zi * ti + std::log1p(std::exp(-std::abs(zi)));
  }
  Matrix<T> out(1, 1);
  out(0, 0) = total / static_cast<T>(n);
  return logits.tape->record(std::move(out), {logits}, [logits, targets](Tape<T>& t, int self) {
    const T g = t.grad(self)(0, 0) / static_cast<T>(targets.size());
    const auto& z = logits.value();
    auto& gz = t.grad(logits.id);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const T p = T(1) / (T(1) + std::exp(-z.data()[i]));
      gz.data()[i] += g * (p - targets.data()[i]);
    }
  });
}

template <typename T>
Var<T> mse(Var<T> pred, const Matrix<T>& targets) {
  check<T>(pred.rows() == targets.rows() && pred.cols() == targets.cols(), "mse: shape mismatch");
  Matrix<T> diff = pred.value() - targets;
  Matrix<T> out(1, 1);
  out(0, 0) = diff.squaredNorm() / static_cast<T>(diff.size());
  return pred.tape->record(std::move(out), {pred}, [pred, diff = std::move(diff)](Tape<T>& t, int self) {
    t.grad(pred.id) += diff * (T(2) * t.grad(self)(0, 0) / static_cast<T>(diff.size()));
  });
}

template <typename T>
Var<T> rel_l2(Var<T> pred, const Matrix<T>& targets) {
  check<T>(pred.rows() == targets.rows() && pred.cols() == targets.cols(), "rel_l2: shape mismatch");
  const T tnorm = targets.norm();
  require(tnorm > T(0), Errc::numerical, "rel_l2: target has zero norm");
  Matrix<T> diff = pred.value() - targets;
  const T dnorm = diff.norm();
  Matrix<T> out(1, 1);
  out(0, 0) = dnorm / tnorm;
  return pred.tape->record(std::move(out), {pred}, [pred, diff = std::move(diff), dnorm, tnorm](Tape<T>& t, int self) {
    if (dnorm == T(0)) return;
    t.grad(pred.id) += diff * (t.grad(self)(0, 0) / (dnorm * tnorm));
  });
}

template <typename T>
Var<T> kl_standard_normal(Var<T> mu, Var<T> log_sigma) {
  const auto& m = mu.value();
  const auto& ls = log_sigma.value();
  check<T>(m.rows() == ls.rows() && m.cols() == ls.cols(), "kl_standard_normal: shape mismatch");
  const auto s2 = (T(2) * ls.array()).exp();
  Matrix<T> out(1, 1);
  out(0, 0) = T(0.5) * (m.array().square() + s2 - T(1) - T(2) * ls.array()).sum() / static_cast<T>(m.size());
  return mu.tape->record(std::move(out), {mu, log_sigma}, [mu, log_sigma](Tape<T>& t, int self) {
    const T g = t.grad(self)(0, 0) / static_cast<T>(mu.value().size());
    if (t.needs_grad(mu.id)) t.grad(mu.id) += mu.value() * g;
    if (t.needs_grad(log_sigma.id))
      t.grad(log_sigma.id).array() += ((T(2) * log_sigma.value().array()).exp() - T(1)) * g;
  });
}

#define GEOPRE_INSTANTIATE_OPS(T)                                                 \
  template Var<T> matmul(Var<T>, Var<T>);                                         \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                      \
  template Var<T> matmul_tn(Var<T>, Var<T>);                                      \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);                                 \
  template Var<T> linear(Var<T>, Var<T>);                                         \
  template Var<T> add(Var<T>, Var<T>);                                            \
  template Var<T> sub(Var<T>, Var<T>);                                            \
  template Var<T> mul(Var<T>, Var<T>);                                            \
  template Var<T> scale(Var<T>, T);                                               \
  template Var<T> exp(Var<T>);                                                    \
  template Var<T> gelu(Var<T>);                                                   \
  template Var<T> add_row(Var<T>, Var<T>);                                        \
  template Var<T> transpose(Var<T>);                                              \
  template Var<T> slice_cols(Var<T>, Eigen::Index, Eigen::Index);                 \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                        \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                          \
  template Var<T> softmax_rows(Var<T>);                                           \
  template Var<T> softmax_cols(Var<T>);                                           \
  template Var<T> col_sum(Var<T>);                                                \
  template Var<T> row_sum(Var<T>);                                                \
  template Var<T> div_rows(Var<T>, Var<T>);                                       \
  template Var<T> sum(Var<T>);                                                    \
  template Var<T> mean(Var<T>);                                                   \
  template Var<T> bce_with_logits(Var<T>, const Matrix<T>&);                      \
  template Var<T> mse(Var<T>, const Matrix<T>&);                                  \
  template Var<T> rel_l2(Var<T>, const Matrix<T>&);                               \
  template Var<T> kl_standard_normal(Var<T>, Var<T>);

GEOPRE_INSTANTIATE_OPS(float)
GEOPRE_INSTANTIATE_OPS(double)

}  // namespace geopre::nn
