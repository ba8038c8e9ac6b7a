#pragma once

#include <span>

#include "wagf/tape.hpp"

// Differentiable operations. Every op validates shapes and throws ShapeError
// on mismatch; there is no implicit broadcasting apart from mul_channel
// ([H,W,C] against [H,W,1]) and mul_scalar (any tensor against [1]).

WAGF_BEGIN_NAMESPACE

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, Real factor);
Var mul_scalar(Var x, Var s);
Var mul_channel(Var x, Var gate);
Var reshape(Var x, Shape shape);
Var transpose2d(Var x);
Var sum(Var x);

Var matmul(Var a, Var b);

Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
/// Softmax along the last axis, stabilised by max subtraction.
Var softmax(Var x);

/// [H,W,C] -> [C], per-channel spatial mean.
Var global_average_pool(Var x);
/// Subtracts each channel's spatial mean.
Var center_channels(Var x);
/// [H,W,C] -> [H/2,W/2,C], mean over non-overlapping 2x2 blocks.
Var avg_pool2(Var x);

/// Dense convolution, stride 1, zero same-padding.
/// x: [H,W,Cin], kernel: [k,k,Cin,Cout], bias: [Cout].
Var conv2d(Var x, Var kernel, Var bias);

/// Depthwise k x k convolution per channel (zero same-padding, stride 1),
/// then a 1x1 pointwise mix and a bias add.
/// x: [H,W,Cin], depthwise: [k,k,Cin], pointwise: [Cin,Cout], bias: [Cout].
Var separable_conv2d(Var x, Var depthwise, Var pointwise, Var bias);

/// LSTM over seq [T,D] with input weights [D,4u], recurrent weights [u,4u]
/// and bias [4u]; gate blocks are ordered input, forget, candidate, output.
/// Zero initial state. Returns the hidden states [T,u].
Var lstm(Var seq, Var input_weights, Var recurrent_weights, Var bias);

/// Mean over the batch of -log softmax(logits)[label]. logits: [B,K].
Var cross_entropy(Var logits, std::span<const int> labels);

WAGF_END_NAMESPACE
