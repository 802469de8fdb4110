// SPDX-License-Identifier: Apache-2.0
//
// Dense f64 inner-loop kernels. A scalar reference table is always present;
// an AVX2/FMA table is compiled in on x86-64 and chosen at runtime when the
// CPU supports it. The environment variable GBN_KERNELS=scalar|avx2 forces a
// variant.
#pragma once

#include <cstddef>
#include <string_view>

namespace gbn::kernels {

struct KernelTable {
  const char* name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = A x, A row-major rows x cols
  void (*gemv)(const double* a, const double* x, double* y, std::size_t rows,
               std::size_t cols);
  // y += A^T g
  void (*gemv_t_acc)(const double* a, const double* g, double* y,
                     std::size_t rows, std::size_t cols);
  // A += g x^T
  void (*ger_acc)(const double* g, const double* x, double* a,
                  std::size_t rows, std::size_t cols);
  // out = a * b elementwise
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // out += a * b elementwise
  void (*mul_acc)(const double* a, const double* b, double* out,
                  std::size_t n);
  // out = a + b elementwise
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
};

const KernelTable& scalar_table();

// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_table();

// The table every tensor primitive dispatches through.
const KernelTable& active();

// Selects a variant by name ("scalar" or "avx2"). Returns false if the
// requested variant is unavailable; the active table is then unchanged.
bool select(std::string_view name);

}  // namespace gbn::kernels
