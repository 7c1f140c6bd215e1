#include <doctest.h>

#include <cmath>
#include <vector>

#include "pf/kernels.hpp"
#include "pf/rng.hpp"

using namespace pf;

namespace {

std::vector<float> random_vec(Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  rng.fill_normal(v);
  return v;
}

void require_close(const std::vector<float>& a, const std::vector<float>& b, double k) {
  REQUIRE(a.size() == b.size());
  // fp32 reassociation error grows with the reduction length
  const double tol = 1e-6 * (k + 4);
  for (std::size_t i = 0; i < a.size(); ++i)
    REQUIRE(std::abs(a[i] - b[i]) <= tol * std::max(1.0, std::abs(static_cast<double>(a[i]))));
}

}  // namespace

TEST_CASE("scalar table is always available and listed first") {
  const auto tables = kernels::available_tables();
  REQUIRE(!tables.empty());
  CHECK(tables.front() == &kernels::scalar_table());
  CHECK_THROWS(kernels::select("no-such-variant"));
}

TEST_CASE("every kernel variant matches the scalar reference") {
  Rng rng(11);
  const auto& ref = kernels::scalar_table();
  for (const kernels::KernelTable* t : kernels::available_tables()) {
    CAPTURE(t->name);
    for (std::size_t n : {1u, 3u, 7u, 8u, 15u, 16u, 17u, 33u, 100u, 257u}) {
      const auto a = random_vec(rng, n), b = random_vec(rng, n);
      const float d0 = ref.dot(a.data(), b.data(), n), d1 = t->dot(a.data(), b.data(), n);
      CHECK(std::abs(d0 - d1) <= 1e-5 * (n + 4));
      auto y0 = random_vec(rng, n);
      auto y1 = y0;
      ref.axpy(0.37f, a.data(), y0.data(), n);
      t->axpy(0.37f, a.data(), y1.data(), n);
      require_close(y0, y1, 1);
    }
    struct Shape {
      std::size_t m, n, k;
    };
    const Shape shapes[] = {{1, 1, 1}, {3, 5, 7}, {4, 4, 8}, {5, 9, 17}, {8, 16, 33}, {13, 7, 64}, {64, 32, 100}};
    for (const auto [m, n, k] : shapes) {
      CAPTURE(m);
      CAPTURE(n);
      CAPTURE(k);
      const auto a = random_vec(rng, m * k), b = random_vec(rng, n * k);
      auto c0 = random_vec(rng, m * n);
      auto c1 = c0;
      ref.gemm_nt(a.data(), b.data(), c0.data(), m, n, k, false);
      t->gemm_nt(a.data(), b.data(), c1.data(), m, n, k, false);
      require_close(c0, c1, static_cast<double>(k));
      ref.gemm_nt(a.data(), b.data(), c0.data(), m, n, k, true);
      t->gemm_nt(a.data(), b.data(), c1.data(), m, n, k, true);
      require_close(c0, c1, static_cast<double>(k));

      const auto bk = random_vec(rng, k * n);
      auto e0 = random_vec(rng, m * n);
      auto e1 = e0;
      ref.gemm_nn(a.data(), bk.data(), e0.data(), m, n, k);
      t->gemm_nn(a.data(), bk.data(), e1.data(), m, n, k);
      require_close(e0, e1, static_cast<double>(k));

      const auto at = random_vec(rng, k * m);
      auto f0 = random_vec(rng, m * n);
      auto f1 = f0;
      ref.gemm_tn(at.data(), bk.data(), f0.data(), m, n, k);
      t->gemm_tn(at.data(), bk.data(), f1.data(), m, n, k);
      require_close(f0, f1, static_cast<double>(k));
    }
  }
}

TEST_CASE("scalar gemm_nt agrees with a naive triple loop") {
  Rng rng(3);
  const std::size_t m = 5, n = 6, k = 7;
  const auto a = random_vec(rng, m * k), b = random_vec(rng, n * k);
  std::vector<float> c(m * n);
  kernels::scalar_table().gemm_nt(a.data(), b.data(), c.data(), m, n, k, false);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += static_cast<double>(a[i * k + p]) * b[j * k + p];
      CHECK(c[i * n + j] == doctest::Approx(acc).epsilon(1e-5));
    }
}

TEST_CASE("select switches the active table") {
  const std::string before = kernels::active().name;
  kernels::select("scalar");
  CHECK(std::string(kernels::active().name) == "scalar");
  kernels::select(before);
  CHECK(std::string(kernels::active().name) == before);
}
