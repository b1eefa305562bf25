#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "h3trans/numeric/tape.hpp"

namespace h3t::nc {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, Tensor2> m;
  std::map<std::string, Tensor2> v;

  friend bool operator==(const AdamState& a, const AdamState& b);
};

/// One bias-corrected Adam update of every parameter that has a gradient.
/// Moments are created lazily with the parameter's shape.
void adam_step(ParamStore& params, const Gradients& grads, AdamState& state);

}  // namespace h3t::nc
