#include "biomass/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "biomass/error.hpp"
#include "biomass/nn/network.hpp"

namespace biomass::nn {

void adamw_step(ParamMap& params, const ParamMap& grads, AdamWState& state, double lr, const AdamWOptions& o,
                Freeze freeze) {
  if (state.m.empty()) {
    state.m = zeros_like(params);
    state.v = zeros_like(params);
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));

  for (auto& [name, w] : params) {
    if (Network::is_frozen(name, freeze)) continue;
    auto g = grads.find(name);
    auto m = state.m.find(name);
    auto v = state.v.find(name);
    if (g == grads.end() || m == state.m.end() || v == state.v.end() || g->second.shape != w.shape ||
        m->second.shape != w.shape)
      throw Error(ErrorCode::ShapeMismatch, "optimizer state or gradient for '" + name + "'");
    m->second.data = o.beta1 * m->second.data + (1.0 - o.beta1) * g->second.data;
    v->second.data = o.beta2 * v->second.data + (1.0 - o.beta2) * g->second.data.cwiseAbs2();
    w.data *= 1.0 - lr * o.weight_decay;
    w.data.array() -=
        lr * (m->second.data.array() / bc1) / ((v->second.data.array() / bc2).sqrt() + o.eps);
  }
}

double cosine_lr(long step, long total_steps, double lr_max, double lr_min) {
  if (total_steps <= 0) return lr_max;
  const double t = static_cast<double>(std::clamp(step, 0L, total_steps)) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace biomass::nn
