#include "classmark/gemm.hpp"

#include <vector>

#ifdef CLASSMARK_HAVE_OPENBLAS
#include <cblas.h>

extern "C" void openblas_set_num_threads(int);

namespace classmark::nn {

namespace {
// The reproducibility contract is single-threaded; pin BLAS accordingly.
struct BlasInit {
  BlasInit() { openblas_set_num_threads(1); }
};
const BlasInit blas_init;
}  // namespace

void dgemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
           const double* a, int lda, const double* b, int ldb, double beta,
           double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

}  // namespace classmark::nn

#else

namespace classmark::nn {

void dgemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
           const double* a, int lda, const double* b, int ldb, double beta,
           double* c, int ldc) {
  // Pack op(A)/op(B) rows so the inner loop streams contiguously.
  auto at = [&](int i, int p) {
    return trans_a ? a[std::size_t(p) * lda + i] : a[std::size_t(i) * lda + p];
  };
  auto bt = [&](int p, int j) {
    return trans_b ? b[std::size_t(j) * ldb + p] : b[std::size_t(p) * ldb + j];
  };

  std::vector<double> brow(std::size_t(k) * n);
  for (int p = 0; p < k; ++p)
    for (int j = 0; j < n; ++j) brow[std::size_t(p) * n + j] = bt(p, j);

  for (int i = 0; i < m; ++i) {
    double* crow = c + std::size_t(i) * ldc;
    if (beta == 0.0) {
      for (int j = 0; j < n; ++j) crow[j] = 0.0;
    } else if (beta != 1.0) {
      for (int j = 0; j < n; ++j) crow[j] *= beta;
    }
    for (int p = 0; p < k; ++p) {
      const double av = alpha * at(i, p);
      const double* br = brow.data() + std::size_t(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * br[j];
    }
  }
}

}  // namespace classmark::nn

#endif
