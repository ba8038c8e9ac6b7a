#include "wagf/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "wagf/errors.hpp"

WAGF_BEGIN_NAMESPACE

namespace {

constexpr Real kNormEpsilon = Real(1e-8);

void check_weights(const Tensor& g, const char* what) {
  for (auto v : g.data()) {
    if (!(v >= Real(0) && v <= Real(1))) {
      throw NumericError(std::string("fuse: ") + what + " weight outside [0,1]");
    }
  }
}

}  // namespace

FusionState::FusionState(const Shape& feature_shape, Real decay_)
    : g_w_ema(Tensor::zeros(feature_shape)), g_sa_ema(Tensor::zeros(feature_shape)), decay(decay_) {
  if (!(decay > Real(0) && decay < Real(1))) throw ConfigError("fusion decay must lie in (0,1)");
}

Tensor normalize_gradients(const Tensor& raw) {
  Tensor out = raw;
  if (out.empty()) return out;
  for (auto& v : out.data()) v = std::abs(v);
  const auto [lo_it, hi_it] = std::minmax_element(out.data().begin(), out.data().end());
  const Real lo = *lo_it, hi = *hi_it;
  if (hi == lo) {
    out.fill(Real(0));
    return out;
  }
  const Real denom = hi - lo + kNormEpsilon;
  for (auto& v : out.data()) v = (v - lo) / denom;
  return out;
}

Tensor fuse(const Tensor& f_wav, const Tensor& f_sa, const Tensor& g_w, const Tensor& g_sa) {
  require_same_shape(f_wav, f_sa, "fuse");
  require_same_shape(f_wav, g_w, "fuse");
  require_same_shape(f_wav, g_sa, "fuse");
  Tensor out(f_wav.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (Real(1) - g_w[i]) * f_wav[i] + (Real(1) - g_sa[i]) * f_sa[i];
  return out;
}

Var fuse(Var f_wav, Var f_sa, const Tensor& g_w, const Tensor& g_sa) {
  if (f_wav.tape != f_sa.tape || !f_wav.valid()) throw std::invalid_argument("fuse: operands on different tapes");
  auto& t = const_cast<Tape&>(*f_wav.tape);
  if (t.checked()) {
    check_weights(g_w, "wavelet");
    check_weights(g_sa, "soft-attention");
  }
  Tensor out = fuse(t.value(f_wav), t.value(f_sa), g_w, g_sa);
  const auto iw = f_wav.id, is = f_sa.id;
  return t.record(std::move(out), {iw, is}, [iw, is, g_w, g_sa](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    if (tp.requires_grad(iw)) {
      auto& d = tp.grad_buffer(iw);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += (Real(1) - g_w[i]) * g[i];
    }
    if (tp.requires_grad(is)) {
      auto& d = tp.grad_buffer(is);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += (Real(1) - g_sa[i]) * g[i];
    }
  });
}

void update_fusion_state(FusionState& state, const Tensor& grad_f_wav, const Tensor& grad_f_sa) {
  require_same_shape(state.g_w_ema, grad_f_wav, "update_fusion_state");
  require_same_shape(state.g_sa_ema, grad_f_sa, "update_fusion_state");
  const Real keep = state.decay, mix = Real(1) - state.decay;
  auto blend = [&](Tensor& ema, const Tensor& grad) {
    const Tensor g = normalize_gradients(grad);
    for (std::size_t i = 0; i < ema.size(); ++i)
      ema[i] = std::clamp(keep * ema[i] + mix * g[i], Real(0), Real(1));
  };
  blend(state.g_w_ema, grad_f_wav);
  blend(state.g_sa_ema, grad_f_sa);
  state.initialized = true;
}

WAGF_END_NAMESPACE
