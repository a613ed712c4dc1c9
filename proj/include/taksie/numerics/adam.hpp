#pragma once

#include "taksie/numerics/tensor.hpp"

namespace taksie::num {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParameterSet m;
  ParameterSet v;
  long step = 0;
  long rejected = 0;

  static AdamState for_params(const ParameterSet& params);
};

// Bias-corrected Adam update. A gradient set containing any non-finite value
// is rejected: parameters and state are left untouched, `rejected` is
// incremented and false is returned.
bool adam_step(AdamState& state, ParameterSet& params, const ParameterSet& grads,
               const AdamConfig& config);

// Scales grads in place so their global L2 norm is at most max_norm; returns
// the norm before scaling.
double clip_global_norm(ParameterSet& grads, double max_norm);

}  // namespace taksie::num
