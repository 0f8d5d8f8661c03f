#pragma once

#include "lnrel/nn.h"

namespace lnrel {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update for every parameter, then zeroes the
// gradients. Throws if any parameter has no gradient buffer.
void adam_step(const ParameterList& params, const AdamConfig& config);

}  // namespace lnrel
