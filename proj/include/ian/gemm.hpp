#pragma once

#include <cstdint>

namespace ian::kernels {

/// C[m x n] = A[m x k] * B[k x n], all row-major with the given leading
/// dimensions. Each output is accumulated with one fused multiply-add per
/// k in increasing k order starting from zero, so the result is bitwise
/// equal to the scalar loop `acc = fma(a[i][p], b[p][j], acc)`.
template <typename T>
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, std::int64_t lda, const T* b,
          std::int64_t ldb, T* c, std::int64_t ldc);

/// out[cols x rows] = in[rows x cols]^T
template <typename T>
void transpose(std::int64_t rows, std::int64_t cols, const T* in, T* out);

}  // namespace ian::kernels
