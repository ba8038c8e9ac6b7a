#pragma once

#include <cstdint>

#include "wagf/tape.hpp"

WAGF_BEGIN_NAMESPACE

struct AdamOptions {
  Real learning_rate = Real(0.01);
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real epsilon = Real(1e-8);
};

/// Per-parameter Adam moments.
struct AdamState {
  AdamState() = default;
  AdamState(const Shape& shape, AdamOptions opts = {})
      : m(Tensor::zeros(shape)), v(Tensor::zeros(shape)), options(opts) {}

  Tensor m;
  Tensor v;
  std::uint64_t step = 0;
  AdamOptions options;
};

/// Bias-corrected Adam update of `param.value` from `param.grad`.
void adam_step(Parameter& param, AdamState& state);

WAGF_END_NAMESPACE
