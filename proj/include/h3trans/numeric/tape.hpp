#pragma once

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "h3trans/numeric/tensor.hpp"
#include "h3trans/rng.hpp"

namespace h3t::nc {

/// Named learnable parameters, iterated in name order.
class ParamStore {
 public:
  Tensor2& add(const std::string& name, Tensor2 value);
  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  Tensor2& add_uniform(const std::string& name, Index rows, Index cols, double fan_in, Rng& rng);

  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Tensor2& at(const std::string& name);
  const Tensor2& at(const std::string& name) const;

  std::map<std::string, Tensor2>& entries() { return params_; }
  const std::map<std::string, Tensor2>& entries() const { return params_; }
  std::size_t size() const { return params_.size(); }

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::map<std::string, Tensor2> params_;
};

using Gradients = std::map<std::string, Tensor2>;

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Tensor2& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode recording of one computation. Nodes are appended in
/// production order, so reverse insertion order is a valid topological order.
class Tape {
 public:
  /// Adds `grad_out` contributions to the parents through Tape::accumulate.
  using Backward = std::function<void(Tape&, const Tensor2& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor2 value);
  /// Leaf bound to a parameter. Repeated calls return the same leaf, so all
  /// uses accumulate into one gradient.
  Var parameter(const ParamStore& store, const std::string& name);
  Var record(Tensor2 value, const std::vector<Var>& parents, Backward backward);

  const Tensor2& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  /// Gradient buffer of v, zero-initialised on first access.
  Tensor2& grad(Var v);
  template <class Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    if (!requires_grad(v)) return;
    grad(v) += g;
  }

  /// Gradients of a 1x1 loss w.r.t. every parameter leaf on this tape.
  /// Gradient buffers are reset first, so repeated calls agree.
  Gradients backward(Var loss);
  /// Same, zero-filled for store parameters that never reached the tape.
  Gradients backward(Var loss, const ParamStore& store);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor2 value;
    Tensor2 grad;
    Backward backward;
    bool requires_grad = false;
    std::string param;
  };
  std::deque<Node> nodes_;
  std::map<std::string, int> param_nodes_;
};

inline const Tensor2& Var::value() const { return tape_->value(*this); }

}  // namespace h3t::nc
