// SPDX-License-Identifier: Apache-2.0
//
// SIMD variants against the scalar reference on random data, including
// lengths that exercise every remainder path.
#include <cmath>
#include <vector>

#include "doctest.h"
#include "gbn/kernels.hpp"
#include "gbn/rng.hpp"

using namespace gbn;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = uniform(rng, -2.0, 2.0);
  return v;
}

void require_close(const std::vector<double>& a, const std::vector<double>& b,
                   double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    REQUIRE(std::abs(a[i] - b[i]) <= tol * (1.0 + std::abs(b[i])));
}

}  // namespace

TEST_CASE("active kernel table is one of the known variants") {
  const std::string name = kernels::active().name;
  struct Restore {
    std::string name;
    ~Restore() { kernels::select(name); }
  } restore{name};
  CHECK((name == "scalar" || name == "avx2"));
  CHECK(kernels::select("scalar"));
  CHECK(std::string(kernels::active().name) == "scalar");
  CHECK_FALSE(kernels::select("made-up"));
  if (kernels::avx2_table()) CHECK(kernels::select("avx2"));
}

TEST_CASE("avx2 kernels agree with scalar reference") {
  const kernels::KernelTable* simd = kernels::avx2_table();
  if (!simd) {
    MESSAGE("AVX2 variant unavailable on this machine; nothing to compare");
    return;
  }
  const kernels::KernelTable& ref = kernels::scalar_table();
  Rng rng(7);
  for (std::size_t n : {1u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 63u, 96u, 130u}) {
    const auto a = random_vec(rng, n), b = random_vec(rng, n);
    CHECK(simd->dot(a.data(), b.data(), n) ==
          doctest::Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-12));

    auto y1 = random_vec(rng, n), y2 = y1;
    ref.axpy(0.37, a.data(), y1.data(), n);
    simd->axpy(0.37, a.data(), y2.data(), n);
    require_close(y2, y1, 1e-14);

    std::vector<double> m1(n), m2(n);
    ref.mul(a.data(), b.data(), m1.data(), n);
    simd->mul(a.data(), b.data(), m2.data(), n);
    CHECK(m1 == m2);  // a single rounding either way
    ref.add(a.data(), b.data(), m1.data(), n);
    simd->add(a.data(), b.data(), m2.data(), n);
    CHECK(m1 == m2);
    ref.mul_acc(a.data(), b.data(), m1.data(), n);
    simd->mul_acc(a.data(), b.data(), m2.data(), n);
    require_close(m2, m1, 1e-14);

    for (std::size_t rows : {1u, 3u, 4u, 5u, 9u}) {
      const auto A = random_vec(rng, rows * n);
      const auto g = random_vec(rng, rows);
      std::vector<double> out1(rows), out2(rows);
      ref.gemv(A.data(), a.data(), out1.data(), rows, n);
      simd->gemv(A.data(), a.data(), out2.data(), rows, n);
      require_close(out2, out1, 1e-12);

      auto t1 = random_vec(rng, n), t2 = t1;
      ref.gemv_t_acc(A.data(), g.data(), t1.data(), rows, n);
      simd->gemv_t_acc(A.data(), g.data(), t2.data(), rows, n);
      require_close(t2, t1, 1e-12);

      auto G1 = A, G2 = A;
      ref.ger_acc(g.data(), a.data(), G1.data(), rows, n);
      simd->ger_acc(g.data(), a.data(), G2.data(), rows, n);
      require_close(G2, G1, 1e-14);
    }
  }
}
