#include "geopre/nn/tape.hpp"

#include "geopre/common/error.hpp"

#include <algorithm>

namespace geopre::nn {

template <typename T>
Parameter<T>& ParameterSet<T>::add(std::string name, std::string group, Matrix<T> init) {
  require(!contains(name), Errc::invalid_argument, "duplicate parameter '" + name + "'");
  Parameter<T> p;
  p.name = std::move(name);
  p.group = std::move(group);
  p.grad = Matrix<T>::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  params_.push_back(std::move(p));
  return params_.back();
}

template <typename T>
Parameter<T>& ParameterSet<T>::at(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  fail(Errc::invalid_argument, "no parameter named '" + std::string(name) + "'");
}

template <typename T>
const Parameter<T>& ParameterSet<T>::at(std::string_view name) const {
  return const_cast<ParameterSet*>(this)->at(name);
}

template <typename T>
bool ParameterSet<T>::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const auto& p) { return p.name == name; });
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count(std::string_view group) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.group == group) n += static_cast<std::size_t>(p.value.size());
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_) {
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      p.grad.resize(p.value.rows(), p.value.cols());
    p.grad.setZero();
  }
}

template <typename T>
Var<T> Tape<T>::constant(Matrix<T> value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Var<T> Tape<T>::param(Parameter<T>& p) {
  Node n;
  n.ext_value = &p.value;
  if (grad_enabled_) {
    require(p.grad.rows() == p.value.rows() && p.grad.cols() == p.value.cols(), Errc::invalid_argument,
            "parameter '" + p.name + "' gradient not initialised; call zero_grad()");
    n.ext_grad = &p.grad;
    n.needs_grad = true;
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Var<T> Tape<T>::record(Matrix<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn) {
  return record(std::move(value), std::vector<Var<T>>(inputs), std::move(fn));
}

template <typename T>
Var<T> Tape<T>::record(Matrix<T> value, const std::vector<Var<T>>& inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const auto& v : inputs) {
      if (nodes_[static_cast<std::size_t>(v.id)].needs_grad) {
        n.needs_grad = true;
        break;
      }
    }
    if (n.needs_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
const Matrix<T>& Tape<T>::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.ext_value ? *n.ext_value : n.value;
}

template <typename T>
Matrix<T>& Tape<T>::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.ext_grad) return *n.ext_grad;
  if (n.grad.size() == 0) {
    const auto& v = value(id);
    n.grad = Matrix<T>::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var<T> root, T seed) {
  require(grad_enabled_, Errc::invalid_argument, "backward on a tape without gradients");
  require(root.value().size() == 1, Errc::invalid_argument, "backward root must be a scalar");
  if (!needs_grad(root.id)) return;
  grad(root.id).setConstant(seed);
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(*this, id);
    // Intermediate gradients are dead once propagated.
    n.grad.resize(0, 0);
  }
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace geopre::nn
