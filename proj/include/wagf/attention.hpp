#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wagf/tape.hpp"

WAGF_BEGIN_NAMESPACE

struct SeparableConvParams {
  Parameter depthwise;  // [k,k,Cin]
  Parameter pointwise;  // [Cin,Cout]
  Parameter bias;       // [Cout]

  static SeparableConvParams make(const std::string& prefix, std::size_t kernel, std::size_t cin,
                                  std::size_t cout, std::uint64_t seed);
  std::size_t out_channels() const { return pointwise.value.dim(1); }
};

struct LstmParams {
  Parameter input_weights;      // [D,4u]
  Parameter recurrent_weights;  // [u,4u]
  Parameter bias;               // [4u]

  static LstmParams make(const std::string& prefix, std::size_t input_size, std::size_t hidden,
                         std::uint64_t seed);
  std::size_t hidden() const { return recurrent_weights.value.dim(0); }
};

/// Spatial soft attention: a separable conv reduces C -> 1 logits, which are
/// softmax-normalised over all H*W positions.
struct SoftAttentionParams {
  SeparableConvParams conv;
  Parameter gamma;  // [1], residual scale, starts at 0

  static SoftAttentionParams make(const std::string& prefix, std::size_t channels, std::uint64_t seed);
};

/// Output channel counts of the feature-difference conv stack.
inline constexpr std::array<std::size_t, 3> kSafaFilters{256, 64, 1};

struct SaFAParams {
  std::array<SeparableConvParams, 3> fdab_convs;
  LstmParams lstm_h;  // rows as timesteps: input W, hidden W
  LstmParams lstm_w;  // columns as timesteps: input H, hidden H
  std::array<SeparableConvParams, 3> out_convs;

  static SaFAParams make(const std::string& prefix, std::size_t height, std::size_t width,
                         std::size_t channels, std::uint64_t seed);
};

/// Named intermediates of one forward pass, copied off the tape.
struct ForwardTrace {
  Tensor f_enc;
  Tensor f_h;
  Tensor f_w_spatial;
  Tensor f_hlstm;
  Tensor f_wlstm;
  Tensor f_lstm;
  Tensor f_symmetry;
  Tensor f_attn;
  Tensor f_sa;
  Tensor f_wav;
  Tensor f_fuse;
  Tensor f_final;
};

struct SoftAttentionResult {
  Var f_sa;
  Var distribution;  // [H*W], sums to 1
};

/// F_sa = f_enc + gamma * (H*W * softmax(conv(f_enc))) (channel broadcast).
SoftAttentionResult soft_attention(Tape& tape, Var f_enc, const SoftAttentionParams& params);

struct FdabResult {
  Var f_lstm;       // [H,W,1]
  Var f_h;          // [H,W]
  Var f_w_spatial;  // [W,H]
  Var f_hlstm;      // [H,W,1]
  Var f_wlstm;      // [H,W,1]
};

/// Feature-difference block: conv stack to one channel, then an LSTM across
/// rows and one across columns whose hidden states tile back to H x W.
FdabResult fdab(Tape& tape, Var f_enc, const SaFAParams& params);

/// F_symmetry[i,j] = F[i,j] * F[j,i]; requires a square map.
Var sab(Var f_lstm);

/// Conv stack then sigmoid, producing the attention map in (0,1).
Var safa_map(Tape& tape, Var f_symmetry, const SaFAParams& params);

/// Applies a stack of separable convs with ReLU between layers and none after
/// the last.
Var separable_stack(Tape& tape, Var x, std::span<const SeparableConvParams> convs);

void collect_parameters(SeparableConvParams& p, std::vector<Parameter*>& out);
void collect_parameters(LstmParams& p, std::vector<Parameter*>& out);
void collect_parameters(SoftAttentionParams& p, std::vector<Parameter*>& out);
void collect_parameters(SaFAParams& p, std::vector<Parameter*>& out);

WAGF_END_NAMESPACE
