#include "pf/kernels.hpp"

namespace pf::kernels {
namespace {

float dot_scalar(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(float a, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void gemm_nt_scalar(const float* a, const float* b, float* c, std::size_t m, std::size_t n,
                    std::size_t k, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* arow = a + i * k;
    float* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const float v = dot_scalar(arow, b + j * k, k);
      crow[j] = accumulate ? crow[j] + v : v;
    }
  }
}

void gemm_nn_scalar(const float* a, const float* b, float* c, std::size_t m, std::size_t n,
                    std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float s = a[i * k + p];
      if (s != 0.0f) axpy_scalar(s, b + p * n, crow, n);
    }
  }
}

void gemm_tn_scalar(const float* a, const float* b, float* c, std::size_t m, std::size_t n,
                    std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float s = a[p * m + i];
      if (s != 0.0f) axpy_scalar(s, b + p * n, crow, n);
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", dot_scalar, axpy_scalar, gemm_nt_scalar,
                                 gemm_nn_scalar, gemm_tn_scalar};
  return table;
}

}  // namespace pf::kernels
