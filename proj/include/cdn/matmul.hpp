#pragma once

#include <cstddef>

namespace cdn::nn {

// Dense kernels used by the tensor ops. The OpenMP variants split over output
// rows, so results are independent of the thread count. The serial versions are
// the reference implementations used in tests and the benchmark.

// C[m,n] = A[m,k] * B[k,n]
void matmul_serial(const double* a, const double* b, double* c, size_t m, size_t k,
                   size_t n);
void matmul_omp(const double* a, const double* b, double* c, size_t m, size_t k,
                size_t n);

// C[m,n] = A[m,k] * B[n,k]^T
void matmul_nt_serial(const double* a, const double* b, double* c, size_t m, size_t k,
                      size_t n);
void matmul_nt_omp(const double* a, const double* b, double* c, size_t m, size_t k,
                   size_t n);

// C[k,n] += A[m,k]^T * B[m,n]   (accumulating; used for weight gradients)
void matmul_tn_acc_serial(const double* a, const double* b, double* c, size_t m,
                          size_t k, size_t n);
void matmul_tn_acc_omp(const double* a, const double* b, double* c, size_t m, size_t k,
                       size_t n);

}  // namespace cdn::nn
