#include "wagf/wavelet.hpp"

#include "wagf/errors.hpp"
#include "wagf/ops.hpp"

WAGF_BEGIN_NAMESPACE

namespace {

constexpr Real kHalf = Real(0.5);

// Both directions share the butterfly since the 4-point Haar matrix / 2 is
// symmetric and orthogonal; only the placement of inputs/outputs differs.
inline void butterfly(Real a, Real b, Real c, Real d, Real& o0, Real& o1, Real& o2, Real& o3) {
  o0 = (a + b + c + d) * kHalf;
  o1 = (a - b + c - d) * kHalf;
  o2 = (a + b - c - d) * kHalf;
  o3 = (a - b - c + d) * kHalf;
}

void check_even(const Shape& s, const char* what) {
  if (s[0] % 2 != 0 || s[1] % 2 != 0) {
    throw ShapeError(std::string(what) + ": spatial dimensions must be even, got " + shape_str(s));
  }
}

// x: [H,W,C] -> bands [4,H/2,W/2,C]
void dwt_packed(const Real* x, Real* bands, std::size_t H, std::size_t W, std::size_t C) {
  const std::size_t Ho = H / 2, Wo = W / 2, band = Ho * Wo * C;
  for (std::size_t i = 0; i < Ho; ++i)
    for (std::size_t j = 0; j < Wo; ++j)
      for (std::size_t c = 0; c < C; ++c) {
        const Real a = x[((2 * i) * W + 2 * j) * C + c];
        const Real b = x[((2 * i) * W + 2 * j + 1) * C + c];
        const Real cc = x[((2 * i + 1) * W + 2 * j) * C + c];
        const Real d = x[((2 * i + 1) * W + 2 * j + 1) * C + c];
        const std::size_t o = (i * Wo + j) * C + c;
        butterfly(a, b, cc, d, bands[o], bands[band + o], bands[2 * band + o], bands[3 * band + o]);
      }
}

void idwt_packed(const Real* bands, Real* x, std::size_t H, std::size_t W, std::size_t C) {
  const std::size_t Ho = H / 2, Wo = W / 2, band = Ho * Wo * C;
  for (std::size_t i = 0; i < Ho; ++i)
    for (std::size_t j = 0; j < Wo; ++j)
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t o = (i * Wo + j) * C + c;
        butterfly(bands[o], bands[band + o], bands[2 * band + o], bands[3 * band + o],
                  x[((2 * i) * W + 2 * j) * C + c], x[((2 * i) * W + 2 * j + 1) * C + c],
                  x[((2 * i + 1) * W + 2 * j) * C + c], x[((2 * i + 1) * W + 2 * j + 1) * C + c]);
      }
}

}  // namespace

HaarSubbands haar_dwt2(const Tensor& channel) {
  if (channel.rank() != 2) throw ShapeError("haar_dwt2: expected [H,W], got " + shape_str(channel.shape()));
  check_even(channel.shape(), "haar_dwt2");
  const std::size_t H = channel.dim(0), W = channel.dim(1);
  Tensor packed({4, H / 2, W / 2});
  dwt_packed(channel.data().data(), packed.data().data(), H, W, 1);
  const std::size_t n = (H / 2) * (W / 2);
  auto band = [&](std::size_t b) {
    return Tensor({H / 2, W / 2}, std::vector<Real>(packed.data().begin() + b * n,
                                                    packed.data().begin() + (b + 1) * n));
  };
  return {band(0), band(1), band(2), band(3)};
}

Tensor haar_idwt2(const HaarSubbands& bands) {
  const auto& s = bands.ll.shape();
  if (s.size() != 2 || bands.lh.shape() != s || bands.hl.shape() != s || bands.hh.shape() != s) {
    throw ShapeError("haar_idwt2: subband shapes are inconsistent");
  }
  const std::size_t n = s[0] * s[1];
  std::vector<Real> packed;
  packed.reserve(4 * n);
  for (const Tensor* b : {&bands.ll, &bands.lh, &bands.hl, &bands.hh})
    packed.insert(packed.end(), b->data().begin(), b->data().end());
  Tensor out({2 * s[0], 2 * s[1]});
  idwt_packed(packed.data(), out.data().data(), 2 * s[0], 2 * s[1], 1);
  return out;
}

Var haar_dwt2(Var x) {
  auto& t = const_cast<Tape&>(*x.tape);
  const auto& xv = t.value(x);
  if (xv.rank() != 3) throw ShapeError("haar_dwt2: expected [H,W,C], got " + shape_str(xv.shape()));
  check_even(xv.shape(), "haar_dwt2");
  const std::size_t H = xv.dim(0), W = xv.dim(1), C = xv.dim(2);
  Tensor out({4, H / 2, W / 2, C});
  dwt_packed(xv.data().data(), out.data().data(), H, W, C);
  const auto ix = x.id;
  return t.record(std::move(out), {ix}, [ix, H, W, C](Tape& tp, std::size_t self) {
    // Adjoint of an orthogonal transform is its inverse.
    const auto& g = tp.out_grad(self);
    Tensor back({H, W, C});
    idwt_packed(g.data().data(), back.data().data(), H, W, C);
    auto& d = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += back[i];
  });
}

Var haar_idwt2(Var bands) {
  auto& t = const_cast<Tape&>(*bands.tape);
  const auto& bv = t.value(bands);
  if (bv.rank() != 4 || bv.dim(0) != 4) {
    throw ShapeError("haar_idwt2: expected packed bands [4,H/2,W/2,C], got " + shape_str(bv.shape()));
  }
  const std::size_t H = 2 * bv.dim(1), W = 2 * bv.dim(2), C = bv.dim(3);
  Tensor out({H, W, C});
  idwt_packed(bv.data().data(), out.data().data(), H, W, C);
  const auto ib = bands.id;
  return t.record(std::move(out), {ib}, [ib, H, W, C](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    Tensor back({4, H / 2, W / 2, C});
    dwt_packed(g.data().data(), back.data().data(), H, W, C);
    auto& d = tp.grad_buffer(ib);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += back[i];
  });
}

Var boundary_features(Var f_enc) {
  auto& t = const_cast<Tape&>(*f_enc.tape);
  Var bands = haar_dwt2(f_enc);
  const auto& s = t.value(bands).shape();
  Tensor mask(s, Real(1));
  const std::size_t band = s[1] * s[2] * s[3];
  std::fill(mask.data().begin(), mask.data().begin() + band, Real(0));
  return haar_idwt2(mul(bands, t.constant(std::move(mask))));
}

Tensor boundary_features(const Tensor& f_enc) {
  Tape tape;
  return tape.value(boundary_features(tape.constant(f_enc)));
}

WAGF_END_NAMESPACE
