#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace geopre::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct Parameter {
  std::string name;
  std::string group;
  Matrix<T> value;
  Matrix<T> grad;
};

/// Owns trainable tensors. Storage is a deque so references stay valid as
/// parameters are added during model construction.
template <typename T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string name, std::string group, Matrix<T> init);
  Parameter<T>& at(std::string_view name);
  const Parameter<T>& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::size_t scalar_count(std::string_view group) const;

  void zero_grad();
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter<T>> params_;
};

template <typename T>
class Tape;

/// Handle to a node on a tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  const Matrix<T>& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Reverse-mode tape over dense row-major matrices. Nodes are appended in
/// evaluation order; backward() walks them in reverse.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var<T> constant(Matrix<T> value);
  /// Leaf bound to a parameter; its gradient accumulates into p.grad, which
  /// must already be sized (ParameterSet::zero_grad does that).
  Var<T> param(Parameter<T>& p);

  /// Appends an op result. `fn` runs only if some input needs a gradient.
  Var<T> record(Matrix<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn);
  Var<T> record(Matrix<T> value, const std::vector<Var<T>>& inputs, BackwardFn fn);

  const Matrix<T>& value(int id) const;
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  /// Gradient buffer for node `id`, zero-initialised on first access.
  Matrix<T>& grad(int id);

  void backward(Var<T> root, T seed = T(1));
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix<T> value;
    Matrix<T> grad;
    const Matrix<T>* ext_value = nullptr;
    Matrix<T>* ext_grad = nullptr;
    bool needs_grad = false;
    BackwardFn backward;
  };

  bool grad_enabled_;
  std::deque<Node> nodes_;
};

template <typename T>
const Matrix<T>& Var<T>::value() const {
  return tape->value(id);
}

}  // namespace geopre::nn
