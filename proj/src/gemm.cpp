#include "ian/gemm.hpp"

#include <algorithm>
#include <cmath>

namespace ian::kernels {

namespace {

// Register tile: MR rows of A against NR contiguous columns of B.
template <typename T>
struct Tile {
  static constexpr int MR = 4;
  static constexpr int NR = 64 / sizeof(T) * 2;  // 32 floats or 16 doubles
};

template <typename T, int MR, int NR>
inline void micro_tile(std::int64_t k, const T* a, std::int64_t lda, const T* b, std::int64_t ldb, T* c,
                       std::int64_t ldc) {
  T acc[MR][NR] = {};
  for (std::int64_t p = 0; p < k; ++p) {
    const T* brow = b + p * ldb;
    for (int i = 0; i < MR; ++i) {
      const T av = a[i * lda + p];
      for (int j = 0; j < NR; ++j) acc[i][j] = std::fma(av, brow[j], acc[i][j]);
    }
  }
  for (int i = 0; i < MR; ++i)
    for (int j = 0; j < NR; ++j) c[i * ldc + j] = acc[i][j];
}

// Edge tiles: same accumulation order, runtime extents.
template <typename T>
inline void edge_tile(std::int64_t mr, std::int64_t nr, std::int64_t k, const T* a, std::int64_t lda,
                      const T* b, std::int64_t ldb, T* c, std::int64_t ldc) {
  for (std::int64_t i = 0; i < mr; ++i) {
    T* crow = c + i * ldc;
    std::fill_n(crow, nr, T(0));
    for (std::int64_t p = 0; p < k; ++p) {
      const T av = a[i * lda + p];
      const T* brow = b + p * ldb;
      for (std::int64_t j = 0; j < nr; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
    }
  }
}

}  // namespace

template <typename T>
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, std::int64_t lda, const T* b,
          std::int64_t ldb, T* c, std::int64_t ldc) {
  constexpr int MR = Tile<T>::MR;
  constexpr int NR = Tile<T>::NR;
  const std::int64_t n_full = n / NR * NR;
  const std::int64_t m_full = m / MR * MR;
  for (std::int64_t j = 0; j < n_full; j += NR) {
    for (std::int64_t i = 0; i < m_full; i += MR)
      micro_tile<T, MR, NR>(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    if (m_full < m) edge_tile<T>(m - m_full, NR, k, a + m_full * lda, lda, b + j, ldb, c + m_full * ldc + j, ldc);
  }
  if (n_full < n) edge_tile<T>(m, n - n_full, k, a, lda, b + n_full, ldb, c + n_full, ldc);
}

template <typename T>
void transpose(std::int64_t rows, std::int64_t cols, const T* in, T* out) {
  constexpr std::int64_t B = 32;
  for (std::int64_t r0 = 0; r0 < rows; r0 += B)
    for (std::int64_t c0 = 0; c0 < cols; c0 += B) {
      const auto r1 = std::min(rows, r0 + B);
      const auto c1 = std::min(cols, c0 + B);
      for (std::int64_t r = r0; r < r1; ++r)
        for (std::int64_t cc = c0; cc < c1; ++cc) out[cc * rows + r] = in[r * cols + cc];
    }
}

template void gemm<float>(std::int64_t, std::int64_t, std::int64_t, const float*, std::int64_t,
                          const float*, std::int64_t, float*, std::int64_t);
template void gemm<double>(std::int64_t, std::int64_t, std::int64_t, const double*, std::int64_t,
                           const double*, std::int64_t, double*, std::int64_t);
template void transpose<float>(std::int64_t, std::int64_t, const float*, float*);
template void transpose<double>(std::int64_t, std::int64_t, const double*, double*);

}  // namespace ian::kernels
