#include "h3trans/numeric/adam.hpp"

#include <cmath>

#include "h3trans/errors.hpp"

namespace h3t::nc {

namespace {

bool same(const std::map<std::string, Tensor2>& a, const std::map<std::string, Tensor2>& b) {
  if (a.size() != b.size()) return false;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return false;
    if (ia->second.rows() != ib->second.rows() || ia->second.cols() != ib->second.cols()) return false;
    if (ia->second != ib->second) return false;
  }
  return true;
}

}  // namespace

bool operator==(const AdamState& a, const AdamState& b) {
  return a.config.lr == b.config.lr && a.config.beta1 == b.config.beta1 && a.config.beta2 == b.config.beta2 &&
         a.config.eps == b.config.eps && a.step == b.step && same(a.m, b.m) && same(a.v, b.v);
}

void adam_step(ParamStore& params, const Gradients& grads, AdamState& state) {
  ++state.step;
  const AdamConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (const auto& [name, g] : grads) {
    Tensor2& p = params.at(name);
    if (p.rows() != g.rows() || p.cols() != g.cols())
      throw DimensionError("adam_step: gradient shape of '" + name + "' does not match the parameter");
    auto [mit, mnew] = state.m.try_emplace(name, Tensor2::Zero(p.rows(), p.cols()));
    auto [vit, vnew] = state.v.try_emplace(name, Tensor2::Zero(p.rows(), p.cols()));
    Tensor2& m = mit->second;
    Tensor2& v = vit->second;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    p.array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  }
}

}  // namespace h3t::nc
