#pragma once

#include <cstdint>
#include <unordered_map>

#include "emodub/tensor.h"

namespace emodub {

struct AdamConfig {
  double lr = 0.00625;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

// Moments are created lazily, shaped like the parameter they track.
struct AdamState {
  struct Moments {
    Matrix first;
    Matrix second;
  };

  AdamConfig config;
  std::uint64_t step = 0;
  std::unordered_map<const Parameter*, Moments> moments;

  AdamState() = default;
  explicit AdamState(AdamConfig c) : config(c) {}
};

// Bias-corrected Adam update of every parameter from its grad; grads are
// zeroed afterwards.
void adam_step(const ParameterList& params, AdamState& state);

void zero_grads(const ParameterList& params);

}  // namespace emodub
