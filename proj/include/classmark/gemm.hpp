#pragma once

#include <cstddef>

namespace classmark::nn {

/// C[m x n] = alpha * op(A) * op(B) + beta * C, row-major.
/// Backed by BLAS when available, otherwise a blocked loop kernel.
void dgemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
           const double* a, int lda, const double* b, int ldb, double beta,
           double* c, int ldc);

}  // namespace classmark::nn
