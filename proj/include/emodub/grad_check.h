#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emodub/tensor.h"

namespace emodub {

struct GradCheckOptions {
  double eps = 1e-5;
  // Differences at or below this are treated as agreement; guards the
  // relative error of near-zero gradient entries against rounding noise.
  double abs_floor = 1e-8;
};

struct ParamGradError {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;  // largest |reverse-mode gradient| in the block
  double max_abs_diff = 0.0;      // largest |analytic - numeric|, before the floor
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_diff = 0.0;
  std::vector<ParamGradError> per_param;
  std::size_t evaluations = 0;
};

// Builds the scalar loss on a fresh tape. Must be deterministic.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients with central differences
/// (L(p+eps) - L(p-eps)) / 2 eps for every entry of every parameter.
/// Per-entry error: 0 when |a - n| <= abs_floor, else |a - n| / max(|a|, |n|).
/// Throws NumericError when the loss is not finite. Parameter values are
/// restored and grads left zeroed on return.
GradCheckReport grad_check(const LossBuilder& loss, const ParameterList& params, GradCheckOptions opts = {});

}  // namespace emodub
