#pragma once

#include "biomass/nn/config.hpp"
#include "biomass/nn/tensor.hpp"

namespace biomass::nn {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

struct AdamWState {
  ParamMap m;
  ParamMap v;
  long step = 0;
};

/// One AdamW update: decoupled decay w <- w (1 - lr*lambda), then the
/// bias-corrected Adam step. Parameters frozen under `freeze` are untouched.
void adamw_step(ParamMap& params, const ParamMap& grads, AdamWState& state, double lr,
                const AdamWOptions& options = {}, Freeze freeze = Freeze::None);

/// lr_min + (lr_max - lr_min) (1 + cos(pi step / total)) / 2.
double cosine_lr(long step, long total_steps, double lr_max, double lr_min);

}  // namespace biomass::nn
