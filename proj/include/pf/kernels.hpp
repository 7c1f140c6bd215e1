#pragma once
// Dense float32 inner loops used by every network in the library.
//
// Each variant fills a KernelTable. The scalar table is the reference; the
// AVX2/FMA table is compiled in its own translation unit and only handed out
// when the running CPU reports the required features. The active table is
// chosen once per process (override with PF_KERNELS=scalar|avx2).

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace pf::kernels {

struct KernelTable {
  const char* name;
  float (*dot)(const float* a, const float* b, std::size_t n);
  // y += a * x
  void (*axpy)(float a, const float* x, float* y, std::size_t n);
  // C[m x n] = A[m x k] * B[n x k]^T  (C += ... when accumulate)
  void (*gemm_nt)(const float* a, const float* b, float* c, std::size_t m, std::size_t n,
                  std::size_t k, bool accumulate);
  // C[m x n] += A[m x k] * B[k x n]
  void (*gemm_nn)(const float* a, const float* b, float* c, std::size_t m, std::size_t n,
                  std::size_t k);
  // C[m x n] += A[k x m]^T * B[k x n]
  void (*gemm_tn)(const float* a, const float* b, float* c, std::size_t m, std::size_t n,
                  std::size_t k);
};

const KernelTable& scalar_table();

// nullptr when the variant was not compiled in or the CPU lacks the features.
const KernelTable* avx2_table();

// All variants usable on this machine, scalar first.
std::vector<const KernelTable*> available_tables();

const KernelTable& active();

// Switches the process-wide table. Throws std::invalid_argument for an
// unknown or unavailable variant.
void select(std::string_view name);

inline float dot(std::span<const float> a, std::span<const float> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(float a, std::span<const float> x, std::span<float> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}

}  // namespace pf::kernels
