#pragma once

#include "wagf/tape.hpp"

WAGF_BEGIN_NAMESPACE

/// Running estimate of the normalised gradient magnitudes of the wavelet
/// and soft-attention branches. Fusion weights are (1 - estimate).
struct FusionState {
  FusionState() = default;
  explicit FusionState(const Shape& feature_shape, Real decay_ = Real(0.9));

  Tensor g_w_ema;
  Tensor g_sa_ema;
  Real decay = Real(0.9);
  bool initialized = false;
};

/// Min-max normalisation of |raw| over the whole tensor into [0,1].
/// A constant tensor maps to all zeros.
Tensor normalize_gradients(const Tensor& raw);

/// (1 - g_w) * f_wav + (1 - g_sa) * f_sa. The weights are constants: no
/// gradient is propagated into them. In checked tapes, weights outside
/// [0,1] raise NumericError.
Var fuse(Var f_wav, Var f_sa, const Tensor& g_w, const Tensor& g_sa);
Tensor fuse(const Tensor& f_wav, const Tensor& f_sa, const Tensor& g_w, const Tensor& g_sa);

/// ema <- decay * ema + (1 - decay) * normalize_gradients(grad), per branch.
void update_fusion_state(FusionState& state, const Tensor& grad_f_wav, const Tensor& grad_f_sa);

WAGF_END_NAMESPACE
