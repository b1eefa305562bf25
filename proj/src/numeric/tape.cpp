#include "h3trans/numeric/tape.hpp"

#include <cmath>

#include "h3trans/errors.hpp"

namespace h3t::nc {

Tensor2& ParamStore::add(const std::string& name, Tensor2 value) {
  auto [it, inserted] = params_.emplace(name, std::move(value));
  if (!inserted) throw DimensionError("parameter '" + name + "' already exists");
  return it->second;
}

Tensor2& ParamStore::add_uniform(const std::string& name, Index rows, Index cols, double fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  Tensor2 t(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) t(r, c) = uniform(rng, -bound, bound);
  return add(name, std::move(t));
}

Tensor2& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw DimensionError("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor2& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw DimensionError("unknown parameter '" + name + "'");
  return it->second;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.params_.size() != b.params_.size()) return false;
  for (auto ia = a.params_.begin(), ib = b.params_.begin(); ia != a.params_.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return false;
    if (ia->second.rows() != ib->second.rows() || ia->second.cols() != ib->second.cols()) return false;
    if (ia->second != ib->second) return false;
  }
  return true;
}

Var Tape::constant(Tensor2 value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false, {}});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::parameter(const ParamStore& store, const std::string& name) {
  if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return Var(this, it->second);
  nodes_.push_back(Node{store.at(name), {}, {}, true, name});
  const int id = static_cast<int>(nodes_.size() - 1);
  param_nodes_.emplace(name, id);
  return Var(this, id);
}

Var Tape::record(Tensor2 value, const std::vector<Var>& parents, Backward backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape() != this) throw DimensionError("operand recorded on a different tape");
    needs |= nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs, {}});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Tensor2& Tape::grad(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) n.grad = Tensor2::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Gradients Tape::backward(Var loss) {
  if (loss.tape() != this) throw DimensionError("backward: loss recorded on a different tape");
  const Node& ln = nodes_[loss.id()];
  if (ln.value.rows() != 1 || ln.value.cols() != 1)
    throw DimensionError("backward: loss must be 1x1, got " + std::to_string(ln.value.rows()) + "x" +
                         std::to_string(ln.value.cols()));
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (ln.requires_grad) {
    grad(loss)(0, 0) = 1.0;
    for (int id = loss.id(); id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
      n.backward(*this, n.grad);
    }
  }
  Gradients out;
  for (const auto& [name, id] : param_nodes_) {
    const Node& n = nodes_[id];
    out[name] = n.grad.size() ? n.grad : Tensor2::Zero(n.value.rows(), n.value.cols());
  }
  return out;
}

Gradients Tape::backward(Var loss, const ParamStore& store) {
  Gradients out = backward(loss);
  for (const auto& [name, value] : store.entries())
    if (!out.count(name)) out[name] = Tensor2::Zero(value.rows(), value.cols());
  return out;
}

}  // namespace h3t::nc
