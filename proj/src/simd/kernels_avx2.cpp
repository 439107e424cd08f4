// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "kernels_impl.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace sepclr::simd::detail {

namespace {

constexpr std::size_t kBlockK = 256;

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// 4 rows x 8 columns of C, k-loop over one block.
inline void tile_4x8(std::size_t kb, const double* a, std::size_t lda, const double* b,
                     std::size_t ldb, double* c, std::size_t ldc, bool load_c) {
  __m256d c00, c01, c10, c11, c20, c21, c30, c31;
  if (load_c) {
    c00 = _mm256_loadu_pd(c);
    c01 = _mm256_loadu_pd(c + 4);
    c10 = _mm256_loadu_pd(c + ldc);
    c11 = _mm256_loadu_pd(c + ldc + 4);
    c20 = _mm256_loadu_pd(c + 2 * ldc);
    c21 = _mm256_loadu_pd(c + 2 * ldc + 4);
    c30 = _mm256_loadu_pd(c + 3 * ldc);
    c31 = _mm256_loadu_pd(c + 3 * ldc + 4);
  } else {
    c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_pd();
  }
  const double* a0 = a;
  const double* a1 = a + lda;
  const double* a2 = a + 2 * lda;
  const double* a3 = a + 3 * lda;
  for (std::size_t p = 0; p < kb; ++p) {
    const double* bp = b + p * ldb;
    const __m256d b0 = _mm256_loadu_pd(bp);
    const __m256d b1 = _mm256_loadu_pd(bp + 4);
    __m256d av = _mm256_broadcast_sd(a0 + p);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a1 + p);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a2 + p);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a3 + p);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  _mm256_storeu_pd(c, c00);
  _mm256_storeu_pd(c + 4, c01);
  _mm256_storeu_pd(c + ldc, c10);
  _mm256_storeu_pd(c + ldc + 4, c11);
  _mm256_storeu_pd(c + 2 * ldc, c20);
  _mm256_storeu_pd(c + 2 * ldc + 4, c21);
  _mm256_storeu_pd(c + 3 * ldc, c30);
  _mm256_storeu_pd(c + 3 * ldc + 4, c31);
}

// 1 row x 4 columns.
inline void tile_1x4(std::size_t kb, const double* a, const double* b, std::size_t ldb, double* c,
                     bool load_c) {
  __m256d acc = load_c ? _mm256_loadu_pd(c) : _mm256_setzero_pd();
  for (std::size_t p = 0; p < kb; ++p) {
    acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p), _mm256_loadu_pd(b + p * ldb), acc);
  }
  _mm256_storeu_pd(c, acc);
}

inline void tile_1x1(std::size_t kb, const double* a, const double* b, std::size_t ldb, double* c,
                     bool load_c) {
  double acc = load_c ? *c : 0.0;
  for (std::size_t p = 0; p < kb; ++p) acc = std::fma(a[p], b[p * ldb], acc);
  *c = acc;
}

void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  if (k == 0) {
    if (!accumulate)
      for (std::size_t i = 0; i < m; ++i) std::fill_n(c + i * ldc, n, 0.0);
    return;
  }
  // B is packed per k-block into contiguous (kb x 8) column panels so the
  // micro-kernel streams it with unit stride.
  thread_local std::vector<double> packed;
  const std::size_t full_cols = n - n % 8;
  for (std::size_t k0 = 0; k0 < k; k0 += kBlockK) {
    const std::size_t kb = std::min(kBlockK, k - k0);
    const bool load_c = accumulate || k0 > 0;
    const double* ablk = a + k0;
    const double* bblk = b + k0 * ldb;
    packed.resize(kb * full_cols);
    for (std::size_t j = 0; j < full_cols; j += 8) {
      double* panel = packed.data() + j * kb;
      for (std::size_t p = 0; p < kb; ++p) {
        _mm256_storeu_pd(panel + p * 8, _mm256_loadu_pd(bblk + p * ldb + j));
        _mm256_storeu_pd(panel + p * 8 + 4, _mm256_loadu_pd(bblk + p * ldb + j + 4));
      }
    }
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      for (std::size_t j = 0; j < full_cols; j += 8)
        tile_4x8(kb, ablk + i * lda, lda, packed.data() + j * kb, 8, c + i * ldc + j, ldc, load_c);
      std::size_t j = full_cols;
      for (; j + 4 <= n; j += 4)
        for (std::size_t r = 0; r < 4; ++r)
          tile_1x4(kb, ablk + (i + r) * lda, bblk + j, ldb, c + (i + r) * ldc + j, load_c);
      for (; j < n; ++j)
        for (std::size_t r = 0; r < 4; ++r)
          tile_1x1(kb, ablk + (i + r) * lda, bblk + j, ldb, c + (i + r) * ldc + j, load_c);
    }
    for (; i < m; ++i) {
      for (std::size_t j = 0; j < full_cols; j += 8) {
        tile_1x4(kb, ablk + i * lda, packed.data() + j * kb, 8, c + i * ldc + j, load_c);
        tile_1x4(kb, ablk + i * lda, packed.data() + j * kb + 4, 8, c + i * ldc + j + 4, load_c);
      }
      std::size_t j = full_cols;
      for (; j + 4 <= n; j += 4) tile_1x4(kb, ablk + i * lda, bblk + j, ldb, c + i * ldc + j, load_c);
      for (; j < n; ++j) tile_1x1(kb, ablk + i * lda, bblk + j, ldb, c + i * ldc + j, load_c);
    }
  }
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s = std::fma(x[i], y[i], s);
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

double squared_distance_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s = std::fma(d, d, s);
  }
  return s;
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable t{Isa::avx2, gemm_nn_avx2, dot_avx2, axpy_avx2, squared_distance_avx2};
  return &t;
}

}  // namespace sepclr::simd::detail

#else

namespace sepclr::simd::detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace sepclr::simd::detail

#endif
