// Compiled with -mavx2 -mfma. Nothing in here may run before dispatch.cpp has
// confirmed CPU support.
#include <immintrin.h>

#include "pf/kernels.hpp"

namespace pf::kernels {
namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

float dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  float acc = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(float a, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

// Four rows of A against one row of B per pass so each B load feeds four FMAs.
void gemm_nt_avx2(const float* a, const float* b, float* c, std::size_t m, std::size_t n,
                  std::size_t k, bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const float* a0 = a + (i + 0) * k;
    const float* a1 = a + (i + 1) * k;
    const float* a2 = a + (i + 2) * k;
    const float* a3 = a + (i + 3) * k;
    for (std::size_t j = 0; j < n; ++j) {
      const float* brow = b + j * k;
      __m256 s0 = _mm256_setzero_ps();
      __m256 s1 = _mm256_setzero_ps();
      __m256 s2 = _mm256_setzero_ps();
      __m256 s3 = _mm256_setzero_ps();
      std::size_t p = 0;
      for (; p + 8 <= k; p += 8) {
        const __m256 vb = _mm256_loadu_ps(brow + p);
        s0 = _mm256_fmadd_ps(_mm256_loadu_ps(a0 + p), vb, s0);
        s1 = _mm256_fmadd_ps(_mm256_loadu_ps(a1 + p), vb, s1);
        s2 = _mm256_fmadd_ps(_mm256_loadu_ps(a2 + p), vb, s2);
        s3 = _mm256_fmadd_ps(_mm256_loadu_ps(a3 + p), vb, s3);
      }
      float r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (; p < k; ++p) {
        r0 += a0[p] * brow[p];
        r1 += a1[p] * brow[p];
        r2 += a2[p] * brow[p];
        r3 += a3[p] * brow[p];
      }
      float* cj = c + i * n + j;
      if (accumulate) {
        cj[0] += r0;
        cj[n] += r1;
        cj[2 * n] += r2;
        cj[3 * n] += r3;
      } else {
        cj[0] = r0;
        cj[n] = r1;
        cj[2 * n] = r2;
        cj[3 * n] = r3;
      }
    }
  }
  for (; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const float v = dot_avx2(a + i * k, b + j * k, k);
      c[i * n + j] = accumulate ? c[i * n + j] + v : v;
    }
  }
}

void gemm_nn_avx2(const float* a, const float* b, float* c, std::size_t m, std::size_t n,
                  std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float s = a[i * k + p];
      if (s != 0.0f) axpy_avx2(s, b + p * n, crow, n);
    }
  }
}

void gemm_tn_avx2(const float* a, const float* b, float* c, std::size_t m, std::size_t n,
                  std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float s = a[p * m + i];
      if (s != 0.0f) axpy_avx2(s, b + p * n, crow, n);
    }
  }
}

}  // namespace

const KernelTable& avx2_table_unchecked() {
  static const KernelTable table{"avx2", dot_avx2, axpy_avx2, gemm_nt_avx2, gemm_nn_avx2,
                                 gemm_tn_avx2};
  return table;
}

}  // namespace pf::kernels
