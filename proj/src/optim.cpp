#include "wagf/optim.hpp"

#include <cmath>

#include "wagf/errors.hpp"

WAGF_BEGIN_NAMESPACE

void adam_step(Parameter& param, AdamState& state) {
  require_same_shape(param.value, param.grad, "adam_step");
  require_same_shape(param.value, state.m, "adam_step");
  require_same_shape(param.value, state.v, "adam_step");
  ++state.step;
  if (!param.trainable) return;
  const auto& o = state.options;
  const auto step = static_cast<Real>(state.step);
  const Real c1 = Real(1) - std::pow(o.beta1, step);
  const Real c2 = Real(1) - std::pow(o.beta2, step);
  for (std::size_t i = 0; i < param.value.size(); ++i) {
    const Real g = param.grad[i];
    state.m[i] = o.beta1 * state.m[i] + (Real(1) - o.beta1) * g;
    state.v[i] = o.beta2 * state.v[i] + (Real(1) - o.beta2) * g * g;
    const Real mhat = state.m[i] / c1;
    const Real vhat = state.v[i] / c2;
    param.value[i] -= o.learning_rate * mhat / (std::sqrt(vhat) + o.epsilon);
  }
}

WAGF_END_NAMESPACE
