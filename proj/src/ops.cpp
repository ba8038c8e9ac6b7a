#include "wagf/ops.hpp"

#include <algorithm>
#include <cmath>

#include "gemm.hpp"
#include "wagf/errors.hpp"

WAGF_BEGIN_NAMESPACE

namespace {

Tape& tape_of(Var v) {
  if (!v.valid()) throw std::invalid_argument("operand is not a recorded node");
  return const_cast<Tape&>(*v.tape);
}

Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("operands live on different tapes");
  return tape_of(a);
}

void need_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     ", got " + shape_str(t.shape()));
  }
}

Real sigmoid_scalar(Real x) { return Real(1) / (Real(1) + std::exp(-x)); }

// Shared zero-padded kxk depthwise kernel used by separable_conv2d.
void depthwise_forward(const Real* x, const Real* w, Real* y, std::size_t H,
                       std::size_t W, std::size_t C, std::size_t k) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < W; ++j) {
      Real* out = y + (i * W + j) * C;
      for (std::size_t di = 0; di < k; ++di) {
        const auto si = static_cast<std::ptrdiff_t>(i + di) - pad;
        if (si < 0 || si >= static_cast<std::ptrdiff_t>(H)) continue;
        for (std::size_t dj = 0; dj < k; ++dj) {
          const auto sj = static_cast<std::ptrdiff_t>(j + dj) - pad;
          if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(W)) continue;
          const Real* in = x + (static_cast<std::size_t>(si) * W + static_cast<std::size_t>(sj)) * C;
          const Real* wk = w + (di * k + dj) * C;
          for (std::size_t c = 0; c < C; ++c) out[c] += in[c] * wk[c];
        }
      }
    }
  }
}

void depthwise_backward(const Real* x, const Real* w, const Real* dy, Real* dx, Real* dw,
                        std::size_t H, std::size_t W, std::size_t C, std::size_t k) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < W; ++j) {
      const Real* g = dy + (i * W + j) * C;
      for (std::size_t di = 0; di < k; ++di) {
        const auto si = static_cast<std::ptrdiff_t>(i + di) - pad;
        if (si < 0 || si >= static_cast<std::ptrdiff_t>(H)) continue;
        for (std::size_t dj = 0; dj < k; ++dj) {
          const auto sj = static_cast<std::ptrdiff_t>(j + dj) - pad;
          if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(W)) continue;
          const std::size_t src = (static_cast<std::size_t>(si) * W + static_cast<std::size_t>(sj)) * C;
          const std::size_t widx = (di * k + dj) * C;
          if (dw) {
            for (std::size_t c = 0; c < C; ++c) dw[widx + c] += x[src + c] * g[c];
          }
          if (dx) {
            for (std::size_t c = 0; c < C; ++c) dx[src + c] += w[widx + c] * g[c];
          }
        }
      }
    }
  }
}

}  // namespace

Var add(Var a, Var b) {
  auto& t = same_tape(a, b);
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  require_same_shape(av, bv, "add");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const auto ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    for (auto id : {ia, ib}) {
      if (!tp.requires_grad(id)) continue;
      auto& d = tp.grad_buffer(id);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  auto& t = same_tape(a, b);
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  require_same_shape(av, bv, "sub");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const auto ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    if (tp.requires_grad(ia)) {
      auto& d = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (tp.requires_grad(ib)) {
      auto& d = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  auto& t = same_tape(a, b);
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  require_same_shape(av, bv, "mul");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const auto ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    const auto& x = tp.value(ia);
    const auto& y = tp.value(ib);
    if (tp.requires_grad(ia)) {
      auto& d = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i];
    }
    if (tp.requires_grad(ib)) {
      auto& d = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * x[i];
    }
  });
}

Var scale(Var x, Real factor) {
  auto& t = tape_of(x);
  Tensor out = t.value(x);
  for (auto& v : out.data()) v *= factor;
  const auto ix = x.id;
  return t.record(std::move(out), {ix}, [ix, factor](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    auto& d = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * factor;
  });
}

Var mul_scalar(Var x, Var s) {
  auto& t = same_tape(x, s);
  const auto& sv = t.value(s);
  if (sv.size() != 1) throw ShapeError("mul_scalar: scale must hold one element, got " + shape_str(sv.shape()));
  Tensor out = t.value(x);
  const Real k = sv[0];
  for (auto& v : out.data()) v *= k;
  const auto ix = x.id, is = s.id;
  return t.record(std::move(out), {ix, is}, [ix, is](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    const auto& xv = tp.value(ix);
    const Real k = tp.value(is)[0];
    if (tp.requires_grad(ix)) {
      auto& d = tp.grad_buffer(ix);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * k;
    }
    if (tp.requires_grad(is)) {
      Real acc = 0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
      tp.grad_buffer(is)[0] += acc;
    }
  });
}

Var mul_channel(Var x, Var gate) {
  auto& t = same_tape(x, gate);
  const auto& xv = t.value(x);
  const auto& gv = t.value(gate);
  need_rank(xv, 3, "mul_channel");
  need_rank(gv, 3, "mul_channel");
  if (gv.dim(0) != xv.dim(0) || gv.dim(1) != xv.dim(1) || gv.dim(2) != 1) {
    throw ShapeError("mul_channel: gate " + shape_str(gv.shape()) + " does not broadcast against " +
                     shape_str(xv.shape()));
  }
  const std::size_t HW = xv.dim(0) * xv.dim(1), C = xv.dim(2);
  Tensor out = xv;
  for (std::size_t p = 0; p < HW; ++p)
    for (std::size_t c = 0; c < C; ++c) out[p * C + c] *= gv[p];
  const auto ix = x.id, ig = gate.id;
  return t.record(std::move(out), {ix, ig}, [ix, ig, HW, C](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    const auto& xv = tp.value(ix);
    const auto& gv = tp.value(ig);
    if (tp.requires_grad(ix)) {
      auto& d = tp.grad_buffer(ix);
      for (std::size_t p = 0; p < HW; ++p)
        for (std::size_t c = 0; c < C; ++c) d[p * C + c] += g[p * C + c] * gv[p];
    }
    if (tp.requires_grad(ig)) {
      auto& d = tp.grad_buffer(ig);
      for (std::size_t p = 0; p < HW; ++p) {
        Real acc = 0;
        for (std::size_t c = 0; c < C; ++c) acc += g[p * C + c] * xv[p * C + c];
        d[p] += acc;
      }
    }
  });
}

Var reshape(Var x, Shape shape) {
  auto& t = tape_of(x);
  Tensor out = t.value(x).reshaped(std::move(shape));
  const auto ix = x.id;
  return t.record(std::move(out), {ix}, [ix](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    auto& d = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

Var transpose2d(Var x) {
  auto& t = tape_of(x);
  const auto& xv = t.value(x);
  need_rank(xv, 2, "transpose2d");
  const std::size_t R = xv.dim(0), C = xv.dim(1);
  Tensor out({C, R});
  detail::transpose(R, C, xv.data().data(), out.data().data());
  const auto ix = x.id;
  return t.record(std::move(out), {ix}, [ix, R, C](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    auto& d = tp.grad_buffer(ix);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) d[r * C + c] += g[c * R + r];
  });
}

Var sum(Var x) {
  auto& t = tape_of(x);
  Tensor out = Tensor::scalar(t.value(x).sum());
  const auto ix = x.id;
  return t.record(std::move(out), {ix}, [ix](Tape& tp, std::size_t self) {
    const Real g = tp.out_grad(self)[0];
    for (auto& v : tp.grad_buffer(ix).data()) v += g;
  });
}

Var matmul(Var a, Var b) {
  auto& t = same_tape(a, b);
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  need_rank(av, 2, "matmul");
  need_rank(bv, 2, "matmul");
  if (av.dim(1) != bv.dim(0)) {
    throw ShapeError("matmul: inner dimensions differ " + shape_str(av.shape()) + " x " +
                     shape_str(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  detail::gemm_nn(m, n, k, av.data().data(), bv.data().data(), out.data().data());
  const auto ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    if (tp.requires_grad(ia)) {
      // dA = dC * B^T
      std::vector<Real> bt(n * k);
      detail::transpose(k, n, tp.value(ib).data().data(), bt.data());
      detail::gemm_nn(m, k, n, g.data().data(), bt.data(), tp.grad_buffer(ia).data().data());
    }
    if (tp.requires_grad(ib)) {
      // dB = A^T * dC
      detail::gemm_tn(k, n, m, tp.value(ia).data().data(), g.data().data(),
                      tp.grad_buffer(ib).data().data());
    }
  });
}

Var relu(Var x) {
  auto& t = tape_of(x);
  Tensor out = t.value(x);
  for (auto& v : out.data()) v = v > Real(0) ? v : Real(0);
  const auto ix = x.id;
  return t.record(std::move(out), {ix}, [ix](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    const auto& xv = tp.value(ix);
    auto& d = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > Real(0)) d[i] += g[i];
  });
}

Var sigmoid(Var x) {
  auto& t = tape_of(x);
  Tensor out = t.value(x);
  for (auto& v : out.data()) v = sigmoid_scalar(v);
  const auto ix = x.id;
  return t.record(std::move(out), {ix}, [ix](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    const auto& y = tp.value(self);
    auto& d = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (Real(1) - y[i]);
  });
}

Var tanh(Var x) {
  auto& t = tape_of(x);
  Tensor out = t.value(x);
  for (auto& v : out.data()) v = std::tanh(v);
  const auto ix = x.id;
  return t.record(std::move(out), {ix}, [ix](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    const auto& y = tp.value(self);
    auto& d = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (Real(1) - y[i] * y[i]);
  });
}

Var softmax(Var x) {
  auto& t = tape_of(x);
  Tensor out = t.value(x);
  const std::size_t n = out.shape().back();
  const std::size_t rows = out.size() / n;
  for (std::size_t r = 0; r < rows; ++r) {
    Real* row = out.data().data() + r * n;
    const Real mx = *std::max_element(row, row + n);
    Real z = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      z += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= z;
  }
  const auto ix = x.id;
  return t.record(std::move(out), {ix}, [ix, n, rows](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    const auto& y = tp.value(self);
    auto& d = tp.grad_buffer(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t o = r * n;
      Real dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += g[o + j] * y[o + j];
      for (std::size_t j = 0; j < n; ++j) d[o + j] += y[o + j] * (g[o + j] - dot);
    }
  });
}

Var global_average_pool(Var x) {
  auto& t = tape_of(x);
  const auto& xv = t.value(x);
  need_rank(xv, 3, "global_average_pool");
  const std::size_t HW = xv.dim(0) * xv.dim(1), C = xv.dim(2);
  Tensor out({C});
  for (std::size_t p = 0; p < HW; ++p)
    for (std::size_t c = 0; c < C; ++c) out[c] += xv[p * C + c];
  const Real inv = Real(1) / static_cast<Real>(HW);
  for (auto& v : out.data()) v *= inv;
  const auto ix = x.id;
  return t.record(std::move(out), {ix}, [ix, HW, C, inv](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    auto& d = tp.grad_buffer(ix);
    for (std::size_t p = 0; p < HW; ++p)
      for (std::size_t c = 0; c < C; ++c) d[p * C + c] += g[c] * inv;
  });
}

Var center_channels(Var x) {
  auto& t = tape_of(x);
  const auto& xv = t.value(x);
  need_rank(xv, 3, "center_channels");
  const std::size_t HW = xv.dim(0) * xv.dim(1), C = xv.dim(2);
  const Real inv = Real(1) / static_cast<Real>(HW);
  std::vector<Real> mean(C, Real(0));
  for (std::size_t p = 0; p < HW; ++p)
    for (std::size_t c = 0; c < C; ++c) mean[c] += xv[p * C + c];
  for (auto& m : mean) m *= inv;
  Tensor out = xv;
  for (std::size_t p = 0; p < HW; ++p)
    for (std::size_t c = 0; c < C; ++c) out[p * C + c] -= mean[c];
  const auto ix = x.id;
  return t.record(std::move(out), {ix}, [ix, HW, C, inv](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    auto& d = tp.grad_buffer(ix);
    std::vector<Real> gmean(C, Real(0));
    for (std::size_t p = 0; p < HW; ++p)
      for (std::size_t c = 0; c < C; ++c) gmean[c] += g[p * C + c];
    for (auto& m : gmean) m *= inv;
    for (std::size_t p = 0; p < HW; ++p)
      for (std::size_t c = 0; c < C; ++c) d[p * C + c] += g[p * C + c] - gmean[c];
  });
}

Var avg_pool2(Var x) {
  auto& t = tape_of(x);
  const auto& xv = t.value(x);
  need_rank(xv, 3, "avg_pool2");
  const std::size_t H = xv.dim(0), W = xv.dim(1), C = xv.dim(2);
  if (H % 2 || W % 2) throw ShapeError("avg_pool2: spatial dims must be even, got " + shape_str(xv.shape()));
  const std::size_t Ho = H / 2, Wo = W / 2;
  Tensor out({Ho, Wo, C});
  for (std::size_t i = 0; i < Ho; ++i)
    for (std::size_t j = 0; j < Wo; ++j)
      for (std::size_t c = 0; c < C; ++c) {
        const Real s = xv[((2 * i) * W + 2 * j) * C + c] + xv[((2 * i) * W + 2 * j + 1) * C + c] +
                       xv[((2 * i + 1) * W + 2 * j) * C + c] +
                       xv[((2 * i + 1) * W + 2 * j + 1) * C + c];
        out[(i * Wo + j) * C + c] = s * Real(0.25);
      }
  const auto ix = x.id;
  return t.record(std::move(out), {ix}, [ix, W, C, Ho, Wo](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    auto& d = tp.grad_buffer(ix);
    for (std::size_t i = 0; i < Ho; ++i)
      for (std::size_t j = 0; j < Wo; ++j)
        for (std::size_t c = 0; c < C; ++c) {
          const Real q = g[(i * Wo + j) * C + c] * Real(0.25);
          d[((2 * i) * W + 2 * j) * C + c] += q;
          d[((2 * i) * W + 2 * j + 1) * C + c] += q;
          d[((2 * i + 1) * W + 2 * j) * C + c] += q;
          d[((2 * i + 1) * W + 2 * j + 1) * C + c] += q;
        }
  });
}

Var conv2d(Var x, Var kernel, Var bias) {
  auto& t = same_tape(x, kernel);
  if (bias.tape != x.tape) throw std::invalid_argument("conv2d: bias on a different tape");
  const auto& xv = t.value(x);
  const auto& kv = t.value(kernel);
  const auto& bv = t.value(bias);
  need_rank(xv, 3, "conv2d");
  need_rank(kv, 4, "conv2d");
  const std::size_t H = xv.dim(0), W = xv.dim(1), Cin = xv.dim(2);
  const std::size_t k = kv.dim(0), Cout = kv.dim(3);
  if (kv.dim(1) != k || kv.dim(2) != Cin) {
    throw ShapeError("conv2d: kernel " + shape_str(kv.shape()) + " incompatible with input " +
                     shape_str(xv.shape()));
  }
  if (k % 2 == 0) throw ShapeError("conv2d: kernel size must be odd");
  if (bv.shape() != Shape{Cout}) throw ShapeError("conv2d: bias must be [" + std::to_string(Cout) + "]");

  // im2col: one row per output pixel, (di, dj, c) patch order matching the kernel layout.
  const std::size_t HW = H * W, P = k * k * Cin;
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  std::vector<Real> cols(HW * P, Real(0));
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j) {
      Real* row = cols.data() + (i * W + j) * P;
      for (std::size_t di = 0; di < k; ++di) {
        const auto si = static_cast<std::ptrdiff_t>(i + di) - pad;
        if (si < 0 || si >= static_cast<std::ptrdiff_t>(H)) continue;
        for (std::size_t dj = 0; dj < k; ++dj) {
          const auto sj = static_cast<std::ptrdiff_t>(j + dj) - pad;
          if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(W)) continue;
          const Real* src = xv.data().data() + (static_cast<std::size_t>(si) * W + static_cast<std::size_t>(sj)) * Cin;
          std::copy(src, src + Cin, row + (di * k + dj) * Cin);
        }
      }
    }
  Tensor out({H, W, Cout});
  for (std::size_t p = 0; p < HW; ++p) std::copy(bv.data().begin(), bv.data().end(), out.data().begin() + p * Cout);
  detail::gemm_nn(HW, Cout, P, cols.data(), kv.data().data(), out.data().data());

  const auto ix = x.id, ik = kernel.id, ib = bias.id;
  return t.record(std::move(out), {ix, ik, ib},
                  [ix, ik, ib, H, W, Cin, k, Cout, HW, P, pad, cols = std::move(cols)](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    if (tp.requires_grad(ib)) {
      auto& db = tp.grad_buffer(ib);
      for (std::size_t p = 0; p < HW; ++p)
        for (std::size_t c = 0; c < Cout; ++c) db[c] += g[p * Cout + c];
    }
    if (tp.requires_grad(ik)) {
      detail::gemm_tn(P, Cout, HW, cols.data(), g.data().data(), tp.grad_buffer(ik).data().data());
    }
    if (tp.requires_grad(ix)) {
      std::vector<Real> kt(Cout * P);
      detail::transpose(P, Cout, tp.value(ik).data().data(), kt.data());
      std::vector<Real> dcols(HW * P, Real(0));
      detail::gemm_nn(HW, P, Cout, g.data().data(), kt.data(), dcols.data());
      auto& dx = tp.grad_buffer(ix);
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
          const Real* row = dcols.data() + (i * W + j) * P;
          for (std::size_t di = 0; di < k; ++di) {
            const auto si = static_cast<std::ptrdiff_t>(i + di) - pad;
            if (si < 0 || si >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t dj = 0; dj < k; ++dj) {
              const auto sj = static_cast<std::ptrdiff_t>(j + dj) - pad;
              if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(W)) continue;
              Real* dst = dx.data().data() + (static_cast<std::size_t>(si) * W + static_cast<std::size_t>(sj)) * Cin;
              const Real* src = row + (di * k + dj) * Cin;
              for (std::size_t c = 0; c < Cin; ++c) dst[c] += src[c];
            }
          }
        }
    }
  });
}

Var separable_conv2d(Var x, Var depthwise, Var pointwise, Var bias) {
  auto& t = same_tape(x, depthwise);
  if (pointwise.tape != x.tape || bias.tape != x.tape) {
    throw std::invalid_argument("separable_conv2d: operands on different tapes");
  }
  const auto& xv = t.value(x);
  const auto& dv = t.value(depthwise);
  const auto& pv = t.value(pointwise);
  const auto& bv = t.value(bias);
  need_rank(xv, 3, "separable_conv2d");
  need_rank(dv, 3, "separable_conv2d depthwise");
  need_rank(pv, 2, "separable_conv2d pointwise");
  const std::size_t H = xv.dim(0), W = xv.dim(1), Cin = xv.dim(2);
  const std::size_t k = dv.dim(0), Cout = pv.dim(1);
  if (dv.dim(1) != k || dv.dim(2) != Cin || pv.dim(0) != Cin) {
    throw ShapeError("separable_conv2d: kernels " + shape_str(dv.shape()) + "/" + shape_str(pv.shape()) +
                     " incompatible with input " + shape_str(xv.shape()));
  }
  if (k % 2 == 0) throw ShapeError("separable_conv2d: depthwise kernel size must be odd");
  if (bv.shape() != Shape{Cout}) throw ShapeError("separable_conv2d: bias must be [" + std::to_string(Cout) + "]");

  const std::size_t HW = H * W;
  std::vector<Real> mid(HW * Cin, Real(0));
  depthwise_forward(xv.data().data(), dv.data().data(), mid.data(), H, W, Cin, k);
  Tensor out({H, W, Cout});
  for (std::size_t p = 0; p < HW; ++p) std::copy(bv.data().begin(), bv.data().end(), out.data().begin() + p * Cout);
  detail::gemm_nn(HW, Cout, Cin, mid.data(), pv.data().data(), out.data().data());

  const auto ix = x.id, id = depthwise.id, ip = pointwise.id, ib = bias.id;
  return t.record(std::move(out), {ix, id, ip, ib},
                  [ix, id, ip, ib, H, W, Cin, Cout, k, HW, mid = std::move(mid)](Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    if (tp.requires_grad(ib)) {
      auto& db = tp.grad_buffer(ib);
      for (std::size_t p = 0; p < HW; ++p)
        for (std::size_t c = 0; c < Cout; ++c) db[c] += g[p * Cout + c];
    }
    if (tp.requires_grad(ip)) {
      detail::gemm_tn(Cin, Cout, HW, mid.data(), g.data().data(), tp.grad_buffer(ip).data().data());
    }
    const bool need_x = tp.requires_grad(ix), need_d = tp.requires_grad(id);
    if (need_x || need_d) {
      std::vector<Real> pt(Cout * Cin);
      detail::transpose(Cin, Cout, tp.value(ip).data().data(), pt.data());
      std::vector<Real> dmid(HW * Cin, Real(0));
      detail::gemm_nn(HW, Cin, Cout, g.data().data(), pt.data(), dmid.data());
      depthwise_backward(tp.value(ix).data().data(), tp.value(id).data().data(), dmid.data(),
                         need_x ? tp.grad_buffer(ix).data().data() : nullptr,
                         need_d ? tp.grad_buffer(id).data().data() : nullptr, H, W, Cin, k);
    }
  });
}

Var lstm(Var seq, Var input_weights, Var recurrent_weights, Var bias) {
  auto& t = same_tape(seq, input_weights);
  if (recurrent_weights.tape != seq.tape || bias.tape != seq.tape) {
    throw std::invalid_argument("lstm: operands on different tapes");
  }
  const auto& xv = t.value(seq);
  const auto& wx = t.value(input_weights);
  const auto& wh = t.value(recurrent_weights);
  const auto& bv = t.value(bias);
  need_rank(xv, 2, "lstm");
  need_rank(wx, 2, "lstm input weights");
  need_rank(wh, 2, "lstm recurrent weights");
  const std::size_t T = xv.dim(0), D = xv.dim(1), u = wh.dim(0), G = 4 * u;
  if (wx.dim(0) != D || wx.dim(1) != G || wh.dim(1) != G || bv.shape() != Shape{G}) {
    throw ShapeError("lstm: weights " + shape_str(wx.shape()) + "/" + shape_str(wh.shape()) + "/" +
                     shape_str(bv.shape()) + " incompatible with sequence " + shape_str(xv.shape()));
  }

  // Cached per step: activated gates [T,4u], cell states [T+1,u] (row 0 = initial).
  std::vector<Real> gates(T * G);
  std::vector<Real> cells((T + 1) * u, Real(0));
  Tensor out({T, u});
  std::vector<Real> h_prev(u, Real(0));
  for (std::size_t s = 0; s < T; ++s) {
    Real* z = gates.data() + s * G;
    std::copy(bv.data().begin(), bv.data().end(), z);
    detail::gemm_nn(1, G, D, xv.data().data() + s * D, wx.data().data(), z);
    detail::gemm_nn(1, G, u, h_prev.data(), wh.data().data(), z);
    const Real* c_prev = cells.data() + s * u;
    Real* c = cells.data() + (s + 1) * u;
    for (std::size_t j = 0; j < u; ++j) {
      const Real ig = sigmoid_scalar(z[j]);
      const Real fg = sigmoid_scalar(z[u + j]);
      const Real cg = std::tanh(z[2 * u + j]);
      const Real og = sigmoid_scalar(z[3 * u + j]);
      z[j] = ig;
      z[u + j] = fg;
      z[2 * u + j] = cg;
      z[3 * u + j] = og;
      c[j] = fg * c_prev[j] + ig * cg;
      h_prev[j] = og * std::tanh(c[j]);
      out[s * u + j] = h_prev[j];
    }
  }

  const auto ix = seq.id, iwx = input_weights.id, iwh = recurrent_weights.id, ib = bias.id;
  return t.record(std::move(out), {ix, iwx, iwh, ib},
                  [ix, iwx, iwh, ib, T, D, u, G, gates = std::move(gates), cells = std::move(cells)](
                      Tape& tp, std::size_t self) {
    const auto& g = tp.out_grad(self);
    const auto& h = tp.value(self);
    const auto& xv = tp.value(ix);
    std::vector<Real> wxt(G * D), wht(G * u);
    detail::transpose(D, G, tp.value(iwx).data().data(), wxt.data());
    detail::transpose(u, G, tp.value(iwh).data().data(), wht.data());
    Real* dx = tp.requires_grad(ix) ? tp.grad_buffer(ix).data().data() : nullptr;
    Real* dwx = tp.requires_grad(iwx) ? tp.grad_buffer(iwx).data().data() : nullptr;
    Real* dwh = tp.requires_grad(iwh) ? tp.grad_buffer(iwh).data().data() : nullptr;
    Real* db = tp.requires_grad(ib) ? tp.grad_buffer(ib).data().data() : nullptr;

    std::vector<Real> dh_next(u, Real(0)), dc_next(u, Real(0)), dz(G);
    const std::vector<Real> zeros(u, Real(0));
    for (std::size_t s = T; s-- > 0;) {
      const Real* a = gates.data() + s * G;
      const Real* c = cells.data() + (s + 1) * u;
      const Real* c_prev = cells.data() + s * u;
      for (std::size_t j = 0; j < u; ++j) {
        const Real ig = a[j], fg = a[u + j], cg = a[2 * u + j], og = a[3 * u + j];
        const Real tc = std::tanh(c[j]);
        const Real dh = g[s * u + j] + dh_next[j];
        const Real dc = dh * og * (Real(1) - tc * tc) + dc_next[j];
        dz[j] = dc * cg * ig * (Real(1) - ig);
        dz[u + j] = dc * c_prev[j] * fg * (Real(1) - fg);
        dz[2 * u + j] = dc * ig * (Real(1) - cg * cg);
        dz[3 * u + j] = dh * tc * og * (Real(1) - og);
        dc_next[j] = dc * fg;
      }
      const Real* h_prev = s > 0 ? h.data().data() + (s - 1) * u : zeros.data();
      if (db) for (std::size_t j = 0; j < G; ++j) db[j] += dz[j];
      if (dwx) detail::gemm_tn(D, G, 1, xv.data().data() + s * D, dz.data(), dwx);
      if (dwh) detail::gemm_tn(u, G, 1, h_prev, dz.data(), dwh);
      if (dx) detail::gemm_nn(1, D, G, dz.data(), wxt.data(), dx + s * D);
      std::fill(dh_next.begin(), dh_next.end(), Real(0));
      detail::gemm_nn(1, u, G, dz.data(), wht.data(), dh_next.data());
    }
  });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  auto& t = tape_of(logits);
  const auto& lv = t.value(logits);
  need_rank(lv, 2, "cross_entropy");
  const std::size_t B = lv.dim(0), K = lv.dim(1);
  if (labels.size() != B) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(B));
  }
  std::vector<int> lab(labels.begin(), labels.end());
  for (std::size_t b = 0; b < B; ++b) {
    if (lab[b] < 0 || static_cast<std::size_t>(lab[b]) >= K) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(lab[b]) + " outside [0," +
                              std::to_string(K) + ")");
    }
  }
  std::vector<Real> probs(B * K);
  Real loss = 0;
  for (std::size_t b = 0; b < B; ++b) {
    const Real* row = lv.data().data() + b * K;
    const Real mx = *std::max_element(row, row + K);
    Real z = 0;
    for (std::size_t j = 0; j < K; ++j) z += std::exp(row[j] - mx);
    const Real logz = std::log(z) + mx;
    for (std::size_t j = 0; j < K; ++j) probs[b * K + j] = std::exp(row[j] - logz);
    loss += logz - row[lab[b]];
  }
  loss /= static_cast<Real>(B);
  const auto il = logits.id;
  return t.record(Tensor::scalar(loss), {il},
                  [il, B, K, lab = std::move(lab), probs = std::move(probs)](Tape& tp, std::size_t self) {
    const Real g = tp.out_grad(self)[0] / static_cast<Real>(B);
    auto& d = tp.grad_buffer(il);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < K; ++j) {
        const Real onehot = static_cast<std::size_t>(lab[b]) == j ? Real(1) : Real(0);
        d[b * K + j] += g * (probs[b * K + j] - onehot);
      }
  });
}

WAGF_END_NAMESPACE
