#pragma once

#include "geopre/nn/tape.hpp"

#include <cstdint>
#include <unordered_map>

namespace geopre::nn {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// AdamW with decoupled weight decay applied to every parameter.
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWOptions opts = {}) : opts_(opts) {}

  void step(ParameterSet<T>& params, double lr);
  std::int64_t steps() const { return t_; }

 private:
  struct Moments {
    Matrix<T> m;
    Matrix<T> v;
  };
  AdamWOptions opts_;
  std::int64_t t_ = 0;
  std::unordered_map<const Parameter<T>*, Moments> state_;
};

/// Global L2 norm over all gradients.
template <typename T>
double grad_norm(const ParameterSet<T>& params);

/// Rescales gradients so their global norm is at most max_norm. Returns the
/// norm before clipping.
template <typename T>
double clip_grad_norm(ParameterSet<T>& params, double max_norm);

/// Half-cycle cosine from lr_max at step 0 to lr_min at step total.
double lr_schedule(long step, long total_steps, double lr_max, double lr_min);

}  // namespace geopre::nn
