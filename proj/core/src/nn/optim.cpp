#include "geopre/nn/optim.hpp"

#include "geopre/common/error.hpp"

#include <cmath>
#include <numbers>

namespace geopre::nn {

template <typename T>
void AdamW<T>::step(ParameterSet<T>& params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(opts_.beta1);
  const T b2 = static_cast<T>(opts_.beta2);
  for (auto& p : params) {
    if (p.grad.size() != p.value.size()) continue;
    auto& s = state_[&p];
    if (s.m.size() == 0) {
      s.m = Matrix<T>::Zero(p.value.rows(), p.value.cols());
      s.v = Matrix<T>::Zero(p.value.rows(), p.value.cols());
    }
    s.m = b1 * s.m + (T(1) - b1) * p.grad;
    s.v = b2 * s.v + (T(1) - b2) * p.grad.cwiseProduct(p.grad);
    p.value *= static_cast<T>(1.0 - lr * opts_.weight_decay);
    const T step_size = static_cast<T>(lr / bc1);
    const T inv_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
    const T eps = static_cast<T>(opts_.eps);
    p.value.array() -= step_size * s.m.array() / (s.v.array().sqrt() * inv_bc2 + eps);
  }
}

template <typename T>
double grad_norm(const ParameterSet<T>& params) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p.grad.size()) sq += p.grad.template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

template <typename T>
double clip_grad_norm(ParameterSet<T>& params, double max_norm) {
  require(max_norm > 0, Errc::invalid_argument, "clip_grad_norm: max_norm must be positive");
  const double norm = grad_norm(params);
  if (norm > max_norm) {
    const T s = static_cast<T>(max_norm / (norm + 1e-12));
    for (auto& p : params) p.grad *= s;
  }
  return norm;
}

double lr_schedule(long step, long total_steps, double lr_max, double lr_min) {
  require(total_steps >= 1 && step >= 0 && step <= total_steps, Errc::invalid_argument,
          "lr_schedule: need 0 <= step <= total_steps");
  if (step == total_steps) return lr_min;
  return lr_min + 0.5 * (lr_max - lr_min) *
                      (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps)));
}

template class AdamW<float>;
template class AdamW<double>;
template double grad_norm(const ParameterSet<float>&);
template double grad_norm(const ParameterSet<double>&);
template double clip_grad_norm(ParameterSet<float>&, double);
template double clip_grad_norm(ParameterSet<double>&, double);

}  // namespace geopre::nn
