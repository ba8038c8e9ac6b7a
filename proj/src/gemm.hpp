#pragma once

#include <cstddef>

#include "wagf/real.hpp"

WAGF_BEGIN_NAMESPACE
namespace detail {

// Row-major kernels; all accumulate into c.

/// c[m,n] += a[m,k] * b[k,n]
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const Real* a,
                    const Real* b, Real* c) {
  for (std::size_t i = 0; i < m; ++i) {
    Real* crow = c + i * n;
    const Real* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = arow[p];
      if (av == Real(0)) continue;
      const Real* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// c[m,n] += a[k,m]^T * b[k,n]
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const Real* a,
                    const Real* b, Real* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const Real* arow = a + p * m;
    const Real* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const Real av = arow[i];
      if (av == Real(0)) continue;
      Real* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// out[cols,rows] = in[rows,cols]^T
inline void transpose(std::size_t rows, std::size_t cols, const Real* in, Real* out) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = in[r * cols + c];
}

}  // namespace detail
WAGF_END_NAMESPACE
