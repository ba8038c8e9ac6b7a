#include "wagf/attention.hpp"

#include <cmath>

#include "wagf/errors.hpp"
#include "wagf/init.hpp"
#include "wagf/ops.hpp"

WAGF_BEGIN_NAMESPACE

namespace {

Parameter make_param(const std::string& name, Tensor value) { return Parameter(name, std::move(value)); }

Rng stream(std::uint64_t seed, const std::string& name) { return Rng(derive_seed(seed, name)); }

Var conv(Tape& tape, Var x, const SeparableConvParams& p) {
  return separable_conv2d(x, tape.parameter(p.depthwise), tape.parameter(p.pointwise),
                          tape.parameter(p.bias));
}

}  // namespace

SeparableConvParams SeparableConvParams::make(const std::string& prefix, std::size_t kernel,
                                              std::size_t cin, std::size_t cout, std::uint64_t seed) {
  SeparableConvParams p;
  const auto dw = prefix + ".depthwise";
  const auto pw = prefix + ".pointwise";
  auto r1 = stream(seed, dw);
  auto r2 = stream(seed, pw);
  p.depthwise = make_param(dw, he_normal({kernel, kernel, cin}, kernel * kernel, r1));
  p.pointwise = make_param(pw, he_normal({cin, cout}, cin, r2));
  p.bias = make_param(prefix + ".bias", Tensor::zeros({cout}));
  return p;
}

LstmParams LstmParams::make(const std::string& prefix, std::size_t input_size, std::size_t hidden,
                            std::uint64_t seed) {
  LstmParams p;
  const Real limit = Real(1) / std::sqrt(static_cast<Real>(hidden));
  const auto wi = prefix + ".input_weights";
  const auto wr = prefix + ".recurrent_weights";
  const auto wb = prefix + ".bias";
  auto r1 = stream(seed, wi);
  auto r2 = stream(seed, wr);
  auto r3 = stream(seed, wb);
  p.input_weights = make_param(wi, uniform({input_size, 4 * hidden}, -limit, limit, r1));
  p.recurrent_weights = make_param(wr, uniform({hidden, 4 * hidden}, -limit, limit, r2));
  p.bias = make_param(wb, uniform({4 * hidden}, -limit, limit, r3));
  return p;
}

SoftAttentionParams SoftAttentionParams::make(const std::string& prefix, std::size_t channels,
                                              std::uint64_t seed) {
  SoftAttentionParams p;
  p.conv = SeparableConvParams::make(prefix + ".conv", 3, channels, 1, seed);
  p.gamma = make_param(prefix + ".gamma", Tensor::zeros({1}));
  return p;
}

SaFAParams SaFAParams::make(const std::string& prefix, std::size_t height, std::size_t width,
                            std::size_t channels, std::uint64_t seed) {
  SaFAParams p;
  std::size_t cin = channels;
  for (std::size_t i = 0; i < kSafaFilters.size(); ++i) {
    p.fdab_convs[i] = SeparableConvParams::make(prefix + ".fdab.conv" + std::to_string(i), 3, cin,
                                                kSafaFilters[i], seed);
    cin = kSafaFilters[i];
  }
  p.lstm_h = LstmParams::make(prefix + ".fdab.lstm_h", width, width, seed);
  p.lstm_w = LstmParams::make(prefix + ".fdab.lstm_w", height, height, seed);
  cin = 1;
  for (std::size_t i = 0; i < kSafaFilters.size(); ++i) {
    p.out_convs[i] = SeparableConvParams::make(prefix + ".out.conv" + std::to_string(i), 3, cin,
                                               kSafaFilters[i], seed);
    cin = kSafaFilters[i];
  }
  return p;
}

Var separable_stack(Tape& tape, Var x, std::span<const SeparableConvParams> convs) {
  for (std::size_t i = 0; i < convs.size(); ++i) {
    x = conv(tape, x, convs[i]);
    if (i + 1 < convs.size()) x = relu(x);
  }
  return x;
}

SoftAttentionResult soft_attention(Tape& tape, Var f_enc, const SoftAttentionParams& params) {
  const auto& s = tape.value(f_enc).shape();
  if (s.size() != 3) throw ShapeError("soft_attention: expected [H,W,C], got " + shape_str(s));
  const std::size_t H = s[0], W = s[1];
  Var logits = conv(tape, f_enc, params.conv);
  Var dist = softmax(reshape(logits, {H * W}));
  Var map = reshape(scale(dist, static_cast<Real>(H * W)), {H, W, 1});
  Var attended = mul_scalar(mul_channel(f_enc, map), tape.parameter(params.gamma));
  return {add(f_enc, attended), dist};
}

FdabResult fdab(Tape& tape, Var f_enc, const SaFAParams& params) {
  const auto& s = tape.value(f_enc).shape();
  if (s.size() != 3) throw ShapeError("fdab: expected [H,W,C], got " + shape_str(s));
  const std::size_t H = s[0], W = s[1];
  if (params.lstm_h.hidden() != W || params.lstm_w.hidden() != H) {
    throw ShapeError("fdab: LSTM sizes do not match feature map " + shape_str(s));
  }
  Var reduced = separable_stack(tape, f_enc, params.fdab_convs);
  FdabResult r;
  r.f_h = reshape(reduced, {H, W});
  r.f_w_spatial = transpose2d(r.f_h);
  const auto& lh = params.lstm_h;
  const auto& lw = params.lstm_w;
  Var hseq = lstm(r.f_h, tape.parameter(lh.input_weights), tape.parameter(lh.recurrent_weights),
                  tape.parameter(lh.bias));
  Var wseq = lstm(r.f_w_spatial, tape.parameter(lw.input_weights),
                  tape.parameter(lw.recurrent_weights), tape.parameter(lw.bias));
  r.f_hlstm = reshape(hseq, {H, W, 1});
  r.f_wlstm = reshape(transpose2d(wseq), {H, W, 1});
  r.f_lstm = add(r.f_hlstm, r.f_wlstm);
  return r;
}

Var sab(Var f_lstm) {
  const auto& s = f_lstm.tape->value(f_lstm).shape();
  if (s.size() != 3 || s[2] != 1) throw ShapeError("sab: expected [H,W,1], got " + shape_str(s));
  if (s[0] != s[1]) throw ShapeError("sab: map must be square, got " + shape_str(s));
  const std::size_t n = s[0];
  Var m = reshape(f_lstm, {n, n});
  return reshape(mul(m, transpose2d(m)), {n, n, 1});
}

Var safa_map(Tape& tape, Var f_symmetry, const SaFAParams& params) {
  return sigmoid(separable_stack(tape, f_symmetry, params.out_convs));
}

void collect_parameters(SeparableConvParams& p, std::vector<Parameter*>& out) {
  out.insert(out.end(), {&p.depthwise, &p.pointwise, &p.bias});
}

void collect_parameters(LstmParams& p, std::vector<Parameter*>& out) {
  out.insert(out.end(), {&p.input_weights, &p.recurrent_weights, &p.bias});
}

void collect_parameters(SoftAttentionParams& p, std::vector<Parameter*>& out) {
  collect_parameters(p.conv, out);
  out.push_back(&p.gamma);
}

void collect_parameters(SaFAParams& p, std::vector<Parameter*>& out) {
  for (auto& c : p.fdab_convs) collect_parameters(c, out);
  collect_parameters(p.lstm_h, out);
  collect_parameters(p.lstm_w, out);
  for (auto& c : p.out_convs) collect_parameters(c, out);
}

WAGF_END_NAMESPACE
