#pragma once

#include "wagf/tape.hpp"

WAGF_BEGIN_NAMESPACE

/// Single-level orthonormal 2D Haar decomposition of one channel.
/// For each 2x2 block [a b; c d]:
///   ll = (a+b+c+d)/2, lh = (a-b+c-d)/2, hl = (a+b-c-d)/2, hh = (a-b-c+d)/2.
struct HaarSubbands {
  Tensor ll;  // approximation
  Tensor lh;  // horizontal detail
  Tensor hl;  // vertical detail
  Tensor hh;  // diagonal detail
};

/// channel: [H,W] with H, W even.
HaarSubbands haar_dwt2(const Tensor& channel);
/// Exact inverse of haar_dwt2; all four bands must share one [H/2,W/2] shape.
Tensor haar_idwt2(const HaarSubbands& bands);

/// Recorded transforms over channels-last maps. The forward packs the bands
/// band-major as [4, H/2, W/2, C] in the order ll, lh, hl, hh.
Var haar_dwt2(Var x);
Var haar_idwt2(Var bands);

/// High-frequency residual of a [H,W,C] map: transform each channel, drop
/// the ll band, invert. Equivalent to subtracting each 2x2 block mean.
Var boundary_features(Var f_enc);
Tensor boundary_features(const Tensor& f_enc);

WAGF_END_NAMESPACE
